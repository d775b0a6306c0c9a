//! The transformed equation for `v = a(v)⁻¹ u`:
//!
//! ```text
//! ∂ₜv = ∂²ₓv + φ(‖v‖²_{H¹}) [F₁(v) ∂ₓv + F₂(v)]
//! F₁ = a⁻¹ [f(P_K(av)) − f(av)] a
//! F₂ = [a⁻¹∂²ₓa − a⁻¹∂ₜa − a⁻¹ f(av) ∂ₓa] v − a⁻¹ g(av)
//! ```
//!
//! `∂²ₓa` comes from differentiating the kernel ODE, and `∂ₜa` solves
//! `∂ₓ(∂ₜa) = ½f(P)∂ₜa + ½f'(P)[P_K ∂ₜu] a`, `∂ₜa(0) = 0`, with
//! `P = P_K(av)` and `∂ₜu` the RDA right-hand side at `u = av`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffeo::Diffeo;
use crate::dynamics::{self, rda_rhs, EvolveOptions};
use crate::error::{Error, Result};
use crate::matrix::{matmul, matvec, rk4_matrix_system, MatrixField};
use crate::nonlinearity::{smoothstep, Nonlinearity, SMOOTHSTEP_MAX_SLOPE};
use crate::sampling::{self, Spectrum};
use crate::scalar::Real;
use crate::spectral::{Grid, Samples, SpectralField};

/// Radial cut-off `φ(z)`, `z = ‖v‖²_{H¹}`: 1 for `z ≤ r₁²`, 0 for `z ≥ r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CutoffSpec<T> {
    pub r1: T,
    pub r: T,
}

impl<T: Real> CutoffSpec<T> {
    pub fn new(r1: T, r: T) -> Result<Self> {
        if !(r1 > T::zero() && r > r1) {
            return Err(Error::Configuration(format!("need 0 < r1 < r, got r1 = {r1}, r = {r}")));
        }
        Ok(CutoffSpec { r1, r })
    }

    /// `r₁ = 1.1 · max_radius`, `r = 2 r₁`.
    pub fn from_measured(max_radius: T) -> Self {
        let r1 = T::lit(1.1) * max_radius;
        CutoffSpec { r1, r: T::lit(2.0) * r1 }
    }

    fn s(&self, z: T) -> T {
        let a = self.r1 * self.r1;
        (z - a) / (self.r * self.r - a)
    }

    pub fn phi(&self, z: T) -> T {
        T::one() - smoothstep(self.s(z)).0
    }

    pub fn dphi(&self, z: T) -> T {
        let a = self.r1 * self.r1;
        -smoothstep(self.s(z)).1 / (self.r * self.r - a)
    }

    /// Lipschitz constant of `z ↦ φ(z)`.
    pub fn lipschitz(&self) -> T {
        T::lit(SMOOTHSTEP_MAX_SLOPE) / (self.r * self.r - self.r1 * self.r1)
    }
}

/// All pieces of the transformed right-hand side at one state.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub a: MatrixField<T>,
    /// `F₁(v)(x)` at the grid nodes (`deriv` unused, zero).
    pub f1: MatrixField<T>,
    pub dt_a: Option<MatrixField<T>>,
    /// `F₂(v)` at the grid nodes and its expansion.
    pub f2_samples: Option<Samples<T>>,
    pub f2: Option<SpectralField<T>>,
    /// `F₁ ∂ₓv + F₂` (or just `F₁∂ₓv` for the cheap path), before the cut-off.
    pub bracket: SpectralField<T>,
    pub phi: T,
}

/// The transformed system at a fixed `K` and cut-off.
#[derive(Clone)]
pub struct Transformed<T: Real, N> {
    diffeo: Diffeo<T, N>,
    cutoff: CutoffSpec<T>,
}

struct Kernel<T> {
    a: MatrixField<T>,
    a_inv: MatrixField<T>,
    v_nodes: Samples<T>,
    av_nodes: Samples<T>,
    u: SpectralField<T>,
    p: SpectralField<T>,
    p_fine: Samples<T>,
}

impl<T: Real, N: Nonlinearity<T>> Transformed<T, N> {
    pub fn new(diffeo: Diffeo<T, N>, cutoff: CutoffSpec<T>) -> Self {
        Transformed { diffeo, cutoff }
    }

    pub fn diffeo(&self) -> &Diffeo<T, N> {
        &self.diffeo
    }

    pub fn cutoff(&self) -> &CutoffSpec<T> {
        &self.cutoff
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.diffeo.grid()
    }

    fn nl(&self) -> &N {
        self.diffeo.nonlinearity()
    }

    fn kernel(&self, v: &SpectralField<T>, warm: Option<&MatrixField<T>>) -> Result<Kernel<T>> {
        let grid = self.grid();
        let (a, _) = self.diffeo.solve_a_of_v_traced(v, warm)?;
        let a_inv = a.pointwise_inverse()?;
        let m = v.m();
        let v_nodes = grid.synthesize(v)?;
        let mut av_nodes = v_nodes.clone();
        let mut x = vec![T::zero(); m];
        let mut y = vec![T::zero(); m];
        for j in 0..v_nodes.nodes {
            v_nodes.gather(j, &mut x);
            matvec(a.at(j), &x, &mut y, m);
            av_nodes.scatter(j, &y);
        }
        let u = grid.analyze(&av_nodes, v.basis())?;
        let p = self.diffeo.project(&u)?;
        let p_fine = grid.synthesize_on(&p, 2 * grid.intervals());
        Ok(Kernel { a, a_inv, v_nodes, av_nodes, u, p, p_fine })
    }

    /// `a⁻¹[f(P) − f(av)]a` at the nodes.
    fn f1_nodes(&self, k: &Kernel<T>) -> MatrixField<T> {
        let m = k.a.m;
        let mm = m * m;
        let mut out = MatrixField::identity(m, k.a.length, k.a.nodes);
        let mut pj = vec![T::zero(); m];
        let mut uj = vec![T::zero(); m];
        let mut fp = vec![T::zero(); mm];
        let mut fu = vec![T::zero(); mm];
        let mut t1 = vec![T::zero(); mm];
        for j in 0..k.a.nodes {
            k.p_fine.gather(2 * j, &mut pj);
            k.av_nodes.gather(j, &mut uj);
            self.nl().f(&pj, &mut fp);
            self.nl().f(&uj, &mut fu);
            for (d, &b) in fp.iter_mut().zip(&fu) {
                *d -= b;
            }
            matmul(&fp, k.a.at(j), &mut t1, m);
            matmul(k.a_inv.at(j), &t1, &mut out.values[j * mm..(j + 1) * mm], m);
        }
        out
    }

    /// `F₁(v)` as a matrix field on the grid.
    pub fn f1(&self, v: &SpectralField<T>) -> Result<MatrixField<T>> {
        let k = self.kernel(v, None)?;
        Ok(self.f1_nodes(&k))
    }

    /// Solves the `∂ₜa` ODE given `P_K ∂ₜu`.
    fn dt_a_from(&self, k: &Kernel<T>, pk_ut: &SpectralField<T>) -> Result<MatrixField<T>> {
        let grid = self.grid();
        let m = k.a.m;
        let mm = m * m;
        let ut_fine = grid.synthesize_on(pk_ut, 2 * grid.intervals());
        let nf = k.p_fine.nodes;
        let mut coef = vec![T::zero(); nf * mm];
        let mut c = vec![T::zero(); nf * mm];
        let mut pj = vec![T::zero(); m];
        let mut hj = vec![T::zero(); m];
        let half = T::lit(0.5);
        for j in 0..nf {
            k.p_fine.gather(j, &mut pj);
            ut_fine.gather(j, &mut hj);
            self.nl().f(&pj, &mut coef[j * mm..(j + 1) * mm]);
            self.nl().df_dir(&pj, &hj, &mut c[j * mm..(j + 1) * mm]);
        }
        coef.iter_mut().chain(c.iter_mut()).for_each(|x| *x *= half);
        let (_, _, b) = rk4_matrix_system(m, grid.intervals(), grid.length(), &coef, Some(&c));
        let (values, deriv) = b.expect("inhomogeneous block requested");
        Ok(MatrixField { m, length: k.a.length, nodes: k.a.nodes, values, deriv })
    }

    /// `∂ₜa(v)` with `∂ₜu` the RDA right-hand side at `u = U(v)`.
    pub fn dt_a(&self, v: &SpectralField<T>) -> Result<MatrixField<T>> {
        let k = self.kernel(v, None)?;
        let ut = rda_rhs(&k.u, self.nl(), self.grid())?;
        self.dt_a_from(&k, &self.diffeo.project(&ut)?)
    }

    /// Full evaluation. With `with_f2 = false` only `F₁∂ₓv` is assembled.
    pub fn evaluate(
        &self,
        v: &SpectralField<T>,
        warm: Option<&MatrixField<T>>,
        with_f2: bool,
    ) -> Result<Evaluation<T>> {
        let grid = self.grid();
        let m = v.m();
        let mm = m * m;
        let phi = self.cutoff.phi(v.h1_norm_sq());
        let k = self.kernel(v, warm)?;
        let f1 = self.f1_nodes(&k);
        let dv = grid.synthesize(&v.derivative())?;
        let mut bracket = k.v_nodes.clone();
        let mut x = vec![T::zero(); m];
        let mut y = vec![T::zero(); m];
        for j in 0..dv.nodes {
            dv.gather(j, &mut x);
            matvec(f1.at(j), &x, &mut y, m);
            bracket.scatter(j, &y);
        }
        let mut dt_a = None;
        let mut f2_samples = None;
        let mut f2 = None;
        if with_f2 {
            let ut = rda_rhs(&k.u, self.nl(), grid)?;
            let dta = self.dt_a_from(&k, &self.diffeo.project(&ut)?)?;
            let dp = grid.synthesize(&k.p.derivative())?;
            let mut s = Samples::zeros(m, k.v_nodes.nodes);
            let mut pj = vec![T::zero(); m];
            let mut dpj = vec![T::zero(); m];
            let mut uj = vec![T::zero(); m];
            let mut vj = vec![T::zero(); m];
            let mut fp = vec![T::zero(); mm];
            let mut fpd = vec![T::zero(); mm];
            let mut fu = vec![T::zero(); mm];
            let mut gu = vec![T::zero(); m];
            let mut t1 = vec![T::zero(); mm];
            let mut t2 = vec![T::zero(); mm];
            let mut w = vec![T::zero(); m];
            let mut z = vec![T::zero(); m];
            let half = T::lit(0.5);
            for j in 0..k.a.nodes {
                k.p_fine.gather(2 * j, &mut pj);
                dp.gather(j, &mut dpj);
                k.av_nodes.gather(j, &mut uj);
                k.v_nodes.gather(j, &mut vj);
                let a = k.a.at(j);
                let da = k.a.deriv_at(j);
                self.nl().f(&pj, &mut fp);
                self.nl().df_dir(&pj, &dpj, &mut fpd);
                self.nl().f(&uj, &mut fu);
                self.nl().g(&uj, &mut gu);
                // M = a'' − ∂ₜa − f(av) a'
                matmul(&fp, da, &mut t1, m);
                matmul(&fpd, a, &mut t2, m);
                let dta_j = dta.at(j);
                let mut mat = vec![T::zero(); mm];
                for i in 0..mm {
                    mat[i] = half * (t1[i] + t2[i]) - dta_j[i];
                }
                matmul(&fu, da, &mut t1, m);
                for i in 0..mm {
                    mat[i] -= t1[i];
                }
                matvec(&mat, &vj, &mut w, m);
                for i in 0..m {
                    w[i] -= gu[i];
                }
                matvec(k.a_inv.at(j), &w, &mut z, m);
                s.scatter(j, &z);
            }
            for (b, &zv) in bracket.data.iter_mut().zip(&s.data) {
                *b += zv;
            }
            f2 = Some(grid.analyze(&s, v.basis())?);
            f2_samples = Some(s);
            dt_a = Some(dta);
        }
        let bracket = grid.analyze(&bracket, v.basis())?;
        Ok(Evaluation { a: k.a, f1, dt_a, f2_samples, f2, bracket, phi })
    }

    pub fn f2(&self, v: &SpectralField<T>) -> Result<SpectralField<T>> {
        Ok(self.evaluate(v, None, true)?.f2.expect("requested"))
    }

    /// `𝓕₁(v) = φ(‖v‖²) F₁(v) ∂ₓv`.
    pub fn forcing_1(&self, v: &SpectralField<T>, warm: Option<&MatrixField<T>>) -> Result<SpectralField<T>> {
        let phi = self.cutoff.phi(v.h1_norm_sq());
        if phi == T::zero() {
            return Ok(v.zeros_like());
        }
        Ok(self.evaluate(v, warm, false)?.bracket.scale(phi))
    }

    /// `𝓕₂(v) = φ(‖v‖²) F₂(v)`.
    pub fn forcing_2(&self, v: &SpectralField<T>, warm: Option<&MatrixField<T>>) -> Result<SpectralField<T>> {
        let phi = self.cutoff.phi(v.h1_norm_sq());
        if phi == T::zero() {
            return Ok(v.zeros_like());
        }
        let e = self.evaluate(v, warm, true)?;
        Ok(e.f2.expect("requested").scale(phi))
    }

    /// `φ(‖v‖²)[F₁∂ₓv + F₂]` and the kernel `a(v)` (zero and `None` outside the ball).
    pub fn nonlinear(
        &self,
        v: &SpectralField<T>,
        warm: Option<&MatrixField<T>>,
    ) -> Result<(SpectralField<T>, Option<MatrixField<T>>)> {
        let phi = self.cutoff.phi(v.h1_norm_sq());
        if phi == T::zero() {
            return Ok((v.zeros_like(), None));
        }
        let e = self.evaluate(v, warm, true)?;
        Ok((e.bracket.scale(phi), Some(e.a)))
    }

    /// `∂²ₓv + φ(‖v‖²)[F₁∂ₓv + F₂]`.
    pub fn transformed_rhs(&self, v: &SpectralField<T>) -> Result<SpectralField<T>> {
        let (mut n, _) = self.nonlinear(v, None)?;
        n.axpy(T::one(), &v.second_derivative())?;
        Ok(n)
    }

    /// Exponential-Euler trajectory of the transformed system.
    pub fn evolve(&self, v0: &SpectralField<T>, t_final: T, dt: T, stride: usize) -> Result<dynamics::Trajectory<T>> {
        let mut warm: Option<MatrixField<T>> = None;
        dynamics::integrate(v0, t_final, dt, T::zero(), EvolveOptions { stride, lipschitz_bound: None }, |v| {
            let (n, a) = self.nonlinear(v, warm.as_ref())?;
            warm = a;
            Ok(n)
        })
    }
}

/// Measured Lipschitz constants at one `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub samples: usize,
    /// Log-log slope of `L₁` against `K` when produced by a sweep.
    pub slope_fit: Option<f64>,
    /// Indices of the maximizing pair for `L₁` and `L₂`.
    pub max_pair: [usize; 2],
}

/// Range norm used by [`measure_lipschitz`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
}

impl Norm {
    pub fn of<T: Real>(self, v: &SpectralField<T>) -> T {
        match self {
            Norm::L2 => v.l2_norm(),
            Norm::H1 => v.h1_norm(),
        }
    }
}

/// `max ‖op(v₁) − op(v₂)‖_range / ‖v₁ − v₂‖_{H¹}` over the pairs; returns the
/// maximum and the index of the maximizing pair.
pub fn measure_lipschitz<T: Real, F>(
    op: F,
    pairs: &[(SpectralField<T>, SpectralField<T>)],
    range: Norm,
) -> Result<(f64, usize)>
where
    F: Fn(&SpectralField<T>) -> Result<SpectralField<T>>,
{
    let mut best = (0.0f64, 0usize);
    for (i, (a, b)) in pairs.iter().enumerate() {
        let d = a.sub(b)?.h1_norm().f64();
        if d == 0.0 {
            continue;
        }
        let r = range.of(&op(a)?.sub(&op(b)?)?).f64() / d;
        if r > best.0 {
            best = (r, i);
        }
    }
    Ok(best)
}

/// Sample pairs for [`measure_lipschitz`]: a third independent pairs in the
/// ball of radius `1.1·radius` (so some straddle the cut-off annulus), a
/// third `(v, v + 1e-2·δ)` and a third `(v, v + 1e-4·δ)`, `‖δ‖_{H¹} = radius`.
pub fn sample_pairs<T: Real>(
    seed: u64,
    template: &SpectralField<T>,
    radius: T,
    count: usize,
) -> Vec<(SpectralField<T>, SpectralField<T>)> {
    let mut rng = sampling::rng(seed);
    let (basis, length, m, n) = (template.basis(), template.length(), template.m(), template.n_modes());
    let spectrum = Spectrum::Smooth { decay: 1.0, max_mode: n };
    let outer = radius * T::lit(1.1);
    (0..count)
        .map(|i| {
            let a = sampling::random_in_ball(&mut rng, basis, length, m, n, spectrum, outer);
            let b = match i % 3 {
                0 => sampling::random_in_ball(&mut rng, basis, length, m, n, spectrum, outer),
                k => {
                    let eps = T::lit(if k == 1 { 1e-2 } else { 1e-4 });
                    let d = sampling::random_field(&mut rng, basis, length, m, n, spectrum, radius * eps);
                    a.add(&d).expect("same layout")
                }
            };
            (a, b)
        })
        .collect()
}

/// `L₁` of `𝓕₁: H¹ → L²` and `L₂` of `𝓕₂: H¹ → H¹` on the given pairs.
pub fn lipschitz_report<T: Real, N: Nonlinearity<T>>(
    tr: &Transformed<T, N>,
    pairs: &[(SpectralField<T>, SpectralField<T>)],
) -> Result<LipschitzReport> {
    let (l1, i1) = measure_lipschitz(|v| tr.forcing_1(v, None), pairs, Norm::L2)?;
    let (l2, i2) = measure_lipschitz(|v| tr.forcing_2(v, None), pairs, Norm::H1)?;
    Ok(LipschitzReport { k: tr.diffeo().k(), l1, l2, samples: pairs.len(), slope_fit: None, max_pair: [i1, i2] })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// One row of a `K` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScalingRow {
    #[serde(rename = "K")]
    pub k: usize,
    /// Largest sampled `sup_x |F₁(v)(x)|` (Frobenius norm per node).
    pub f1_sup: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScalingReport {
    pub rows: Vec<KScalingRow>,
    pub f1_slope: f64,
    pub l1_slope: f64,
    pub samples: usize,
}

/// Sweeps `K` over `ks` with the same probe fields for every `K`: coherent
/// rough fields of norm `0.9·r₁` (inside the region where `φ = 1`), and for
/// `L₁` the pairs `(v, v + δ)` with rough `δ` of norm `1e-3·r₁`.
pub fn k_scaling<N: Nonlinearity<f64> + Clone>(
    nl: &N,
    grid: &Arc<Grid<f64>>,
    cutoff: CutoffSpec<f64>,
    ks: &[usize],
    samples: usize,
    seed: u64,
) -> Result<KScalingReport> {
    let mut rng = sampling::rng(seed);
    let (length, m, n) = (grid.length(), nl.m(), grid.n_modes());
    let basis = crate::spectral::BasisKind::DirichletSine;
    let probes: Vec<SpectralField<f64>> = (0..samples)
        .map(|i| sampling::random_field(&mut rng, basis, length, m, n, Spectrum::Rough { alternate: i % 2 == 1 }, 0.9 * cutoff.r1))
        .collect();
    let pairs: Vec<(SpectralField<f64>, SpectralField<f64>)> = probes
        .iter()
        .map(|v| {
            let d = sampling::random_field(&mut rng, basis, length, m, n, Spectrum::Rough { alternate: true }, 1e-3 * cutoff.r1);
            Ok((v.clone(), v.add(&d)?))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &k in ks {
        let tr = Transformed::new(Diffeo::new(nl.clone(), grid.clone(), k)?, cutoff);
        let mut f1_sup: f64 = 0.0;
        for v in &probes {
            let f = tr.f1(v)?;
            for j in 0..f.nodes {
                f1_sup = f1_sup.max(f.at(j).iter().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
        let (l1, _) = measure_lipschitz(|v| tr.forcing_1(v, None), &pairs, Norm::L2)?;
        rows.push(KScalingRow { k, f1_sup, l1 });
    }
    let kx: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let f1_slope = loglog_slope(&kx, &rows.iter().map(|r| r.f1_sup).collect::<Vec<_>>());
    let l1_slope = loglog_slope(&kx, &rows.iter().map(|r| r.l1).collect::<Vec<_>>());
    Ok(KScalingReport { rows, f1_slope, l1_slope, samples })
}

/// Integrates the RDA system from `u0` and the transformed system from
/// `V(u0)` with the same step, returning `max_t ‖V(u(t)) − v(t)‖_{H¹}` over
/// the recorded instants.
pub fn equivalence_check<T: Real, N: Nonlinearity<T>>(
    tr: &Transformed<T, N>,
    u0: &SpectralField<T>,
    t_final: T,
    dt: T,
    stride: usize,
) -> Result<T> {
    let grid = tr.grid();
    let orig = dynamics::evolve_with(
        u0,
        t_final,
        dt,
        tr.nl(),
        grid,
        EvolveOptions { stride, lipschitz_bound: None },
    )?;
    let v0 = tr.diffeo().inverse_map(u0)?;
    let trans = tr.evolve(&v0, t_final, dt, stride)?;
    let mut worst = T::zero();
    for (u, v) in orig.states.iter().zip(&trans.states) {
        let d = tr.diffeo().inverse_map(u)?.sub(v)?.h1_norm();
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::presets;
    use crate::spectral::BasisKind;
    use std::f64::consts::PI;

    #[test]
    fn cutoff_profile() {
        let c = CutoffSpec::new(1.0f64, 2.0).unwrap();
        assert_eq!(c.phi(0.5), 1.0);
        assert_eq!(c.phi(1.0), 1.0);
        assert_eq!(c.phi(4.0), 0.0);
        assert!((c.phi(2.5) - 0.5).abs() < 1e-15);
        assert!((c.lipschitz() - 1.875 / 3.0).abs() < 1e-15);
        assert!((-c.dphi(2.5) - c.lipschitz()).abs() < 1e-15);
        assert!(CutoffSpec::new(2.0, 1.0).is_err());
    }

    #[test]
    fn pure_heat_outside_ball() {
        let grid = Grid::new(16, PI).unwrap();
        let d = Diffeo::new(presets::burgers_cutoff::<f64>(), grid, 4).unwrap();
        let t = Transformed::new(d, CutoffSpec::new(0.5, 1.0).unwrap());
        let v = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 16, 0, 2).unwrap().scale(3.0);
        let r = t.transformed_rhs(&v).unwrap();
        assert_eq!(r, v.second_derivative());
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}
