//! Time integration of the RDA system, dissipativity monitoring and
//! absorbing-ball measurement.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::scalar::Real;
use crate::spectral::{BasisKind, Grid, SpectralField};

/// Norm above which a state is treated as blown up.
const BLOWUP_NORM: f64 = 1e12;

/// Uniformly sampled solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<SpectralField<T>>,
    /// Integrator step; recorded states may be spaced by a multiple of it.
    pub dt: T,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&SpectralField<T>> {
        self.states.last()
    }

    pub fn h1_norms(&self) -> Vec<T> {
        self.states.iter().map(SpectralField::h1_norm).collect()
    }

    /// CSV with columns `t,component,mode,coeff`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,component,mode,coeff")?;
        for (t, u) in self.times.iter().zip(&self.states) {
            for c in 0..u.m() {
                for (i, a) in u.component(c).iter().enumerate() {
                    writeln!(w, "{},{},{},{:e}", t, c, u.mode_of(i), a.f64())?;
                }
            }
        }
        Ok(())
    }
}

/// `φ₁(x) = (1 − e^{−x})/x`, `φ₁(0) = 1`.
pub fn phi1<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-8) {
        T::one() - x / T::lit(2.0)
    } else {
        -(-x).exp_m1() / x
    }
}

/// `−f(u)∂ₓu − g(u)` evaluated pseudo-spectrally, returned in the basis of `u`.
pub fn nonlinear_term<T: Real, N: Nonlinearity<T> + ?Sized>(
    u: &SpectralField<T>,
    nl: &N,
    grid: &Grid<T>,
) -> Result<SpectralField<T>> {
    let m = u.m();
    if nl.m() != m {
        return Err(Error::SizeMismatch { expected: nl.m(), got: m });
    }
    let vals = grid.synthesize(u)?;
    let dvals = if nl.f_vanishes() { None } else { Some(grid.synthesize(&u.derivative())?) };
    let mut out = vals.clone();
    let mut uj = vec![T::zero(); m];
    let mut pj = vec![T::zero(); m];
    let mut fm = vec![T::zero(); m * m];
    let mut gv = vec![T::zero(); m];
    let mut res = vec![T::zero(); m];
    for j in 0..vals.nodes {
        vals.gather(j, &mut uj);
        nl.g(&uj, &mut gv);
        for i in 0..m {
            res[i] = -gv[i];
        }
        if let Some(d) = &dvals {
            d.gather(j, &mut pj);
            nl.f(&uj, &mut fm);
            for i in 0..m {
                res[i] -= crate::scalar::dot(&fm[i * m..(i + 1) * m], &pj);
            }
        }
        out.scatter(j, &res);
    }
    grid.analyze(&out, u.basis())
}

/// `∂²ₓu − f(u)∂ₓu − g(u)` for Dirichlet `u`.
pub fn rda_rhs<T: Real, N: Nonlinearity<T> + ?Sized>(
    u: &SpectralField<T>,
    nl: &N,
    grid: &Grid<T>,
) -> Result<SpectralField<T>> {
    if u.basis() != BasisKind::DirichletSine {
        return Err(Error::BasisMismatch("rda_rhs expects a Dirichlet field".into()));
    }
    let mut r = nonlinear_term(u, nl, grid)?;
    r.axpy(T::one(), &u.second_derivative())?;
    Ok(r)
}

/// One exponential-Euler step for `∂ₜu = −(A + shift)u + n`, `A = −∂²ₓ`:
/// `u_k ← e^{−μ_k dt} u_k + dt φ₁(μ_k dt) n_k` with `μ_k = λ_k + shift`.
pub fn exp_euler_step<T: Real>(
    u: &SpectralField<T>,
    n: &SpectralField<T>,
    dt: T,
    shift: T,
) -> Result<SpectralField<T>> {
    if !u.same_layout(n) {
        return Err(Error::BasisMismatch("state and forcing layouts differ".into()));
    }
    let mut out = u.clone();
    let count = u.count();
    for c in 0..u.m() {
        let src = n.component(c);
        let dst = out.component_mut(c);
        for i in 0..count {
            let x = (u.eigen(i) + shift) * dt;
            dst[i] = (-x).exp() * dst[i] + dt * phi1(x) * src[i];
        }
    }
    Ok(out)
}

fn check_state<T: Real>(u: &SpectralField<T>, time: T) -> Result<()> {
    if !u.is_finite() || u.h1_norm().f64() > BLOWUP_NORM {
        return Err(Error::IntegrationBlowup { time: time.f64() });
    }
    Ok(())
}

/// One step of the RDA system.
pub fn step_imex<T: Real, N: Nonlinearity<T> + ?Sized>(
    u: &SpectralField<T>,
    dt: T,
    nl: &N,
    grid: &Grid<T>,
) -> Result<SpectralField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if u.basis() != BasisKind::DirichletSine {
        return Err(Error::BasisMismatch("step_imex expects a Dirichlet field".into()));
    }
    let n = nonlinear_term(u, nl, grid)?;
    exp_euler_step(u, &n, dt, T::zero())
}

/// Recording options for [`evolve_with`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions<T> {
    /// Record every `stride`-th step (the initial and final states are always kept).
    pub stride: usize,
    /// Upper bound for the Lipschitz constant of the nonlinear term; enforces
    /// `dt · bound ≤ 0.5` when given.
    pub lipschitz_bound: Option<T>,
}

impl<T> Default for EvolveOptions<T> {
    fn default() -> Self {
        EvolveOptions { stride: 1, lipschitz_bound: None }
    }
}

/// Generic exponential-Euler driver for `∂ₜu = −(A + shift)u + n(u)`.
pub fn integrate<T: Real, F>(
    u0: &SpectralField<T>,
    t_final: T,
    dt: T,
    shift: T,
    opts: EvolveOptions<T>,
    mut nonlinear: F,
) -> Result<Trajectory<T>>
where
    F: FnMut(&SpectralField<T>) -> Result<SpectralField<T>>,
{
    if !(dt > T::zero()) || !(t_final >= T::zero()) {
        return Err(Error::Domain("dt must be positive and T non-negative".into()));
    }
    if let Some(l) = opts.lipschitz_bound {
        if dt * l > T::lit(0.5) {
            return Err(Error::Domain(format!("dt·L_nl = {} exceeds 0.5", dt * l)));
        }
    }
    let steps = (t_final / dt).round().to_usize().unwrap_or(0);
    let stride = opts.stride.max(1);
    let mut traj = Trajectory { times: vec![T::zero()], states: vec![u0.clone()], dt };
    let mut u = u0.clone();
    for s in 1..=steps {
        let n = nonlinear(&u)?;
        u = exp_euler_step(&u, &n, dt, shift)?;
        let t = dt * T::of(s);
        check_state(&u, t)?;
        if s % stride == 0 || s == steps {
            traj.times.push(t);
            traj.states.push(u.clone());
        }
    }
    Ok(traj)
}

pub fn evolve<T: Real, N: Nonlinearity<T> + ?Sized>(
    u0: &SpectralField<T>,
    t_final: T,
    dt: T,
    nl: &N,
    grid: &Grid<T>,
) -> Result<Trajectory<T>> {
    evolve_with(u0, t_final, dt, nl, grid, EvolveOptions::default())
}

pub fn evolve_with<T: Real, N: Nonlinearity<T> + ?Sized>(
    u0: &SpectralField<T>,
    t_final: T,
    dt: T,
    nl: &N,
    grid: &Grid<T>,
    opts: EvolveOptions<T>,
) -> Result<Trajectory<T>> {
    if u0.basis() != BasisKind::DirichletSine {
        return Err(Error::BasisMismatch("evolve expects a Dirichlet field".into()));
    }
    integrate(u0, t_final, dt, T::zero(), opts, |u| nonlinear_term(u, nl, grid))
}

/// Result of [`dissipative_monitor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    #[serde(rename = "C_star")]
    pub c_star: f64,
    pub ok: bool,
    /// `sup_t ∫_t^{t+1} ‖∂²ₓu‖² ds` over the recorded window.
    pub h2_window_max: f64,
}

/// Candidate grids searched by [`dissipative_monitor`].
pub const MONITOR_C: [f64; 13] = [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5, 3.75, 4.0];
/// Multiples of `λ₁` tried for `α`.
pub const MONITOR_ALPHA: [f64; 9] = [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0];

/// Finds `(C, α, C_*)` with `‖u(t)‖_{H¹} ≤ C‖u₀‖_{H¹}e^{−αt} + C_*` at every
/// recorded instant. Among the grid candidates the smallest `C_*` wins, ties
/// broken by larger `α`, then smaller `C`.
pub fn dissipative_monitor<T: Real>(traj: &Trajectory<T>) -> Result<DissipativityReport> {
    let first = traj.states.first().ok_or_else(|| Error::MonitorFailure("empty trajectory".into()))?;
    let norms: Vec<f64> = traj.h1_norms().iter().map(|x| x.f64()).collect();
    if norms.iter().any(|x| !x.is_finite()) {
        return Err(Error::MonitorFailure("non-finite state in trajectory".into()));
    }
    let times: Vec<f64> = traj.times.iter().map(|t| t.f64()).collect();
    let lambda1 = first.eigen(if first.basis() == BasisKind::NeumannCosine { 1 } else { 0 }).f64();
    let n0 = norms[0];
    let tol = 1e-12 * (1.0 + n0);
    let mut best: Option<(f64, f64, f64)> = None;
    for &c in &MONITOR_C {
        for &af in &MONITOR_ALPHA {
            let alpha = af * lambda1;
            let cs = excess(&times, &norms, c, alpha, tol);
            let better = match best {
                None => true,
                Some((bc, ba, bcs)) => {
                    cs < bcs || (cs == bcs && (alpha > ba || (alpha == ba && c < bc)))
                }
            };
            if better {
                best = Some((c, alpha, cs));
            }
        }
    }
    let (c, alpha, c_star) = best.ok_or_else(|| Error::MonitorFailure("no candidates".into()))?;
    let h2_window_max = h2_window_max(traj);
    let ok = c_star.is_finite() && h2_window_max.is_finite();
    Ok(DissipativityReport { c, alpha, c_star, ok, h2_window_max })
}

fn excess(times: &[f64], norms: &[f64], c: f64, alpha: f64, tol: f64) -> f64 {
    let n0 = norms[0];
    let mut cs: f64 = 0.0;
    for (t, n) in times.iter().zip(norms) {
        cs = cs.max(n - c * n0 * (-alpha * t).exp());
    }
    if cs <= tol {
        0.0
    } else {
        cs
    }
}

/// Smallest `C_*` admissible for the given `(C, α)`.
pub fn admissible_c_star<T: Real>(traj: &Trajectory<T>, c: f64, alpha: f64) -> f64 {
    let norms: Vec<f64> = traj.h1_norms().iter().map(|x| x.f64()).collect();
    let times: Vec<f64> = traj.times.iter().map(|t| t.f64()).collect();
    excess(&times, &norms, c, alpha, 1e-12 * (1.0 + norms[0]))
}

fn h2_window_max<T: Real>(traj: &Trajectory<T>) -> f64 {
    let times: Vec<f64> = traj.times.iter().map(|t| t.f64()).collect();
    let h2: Vec<f64> = traj.states.iter().map(|u| u.h2_seminorm().f64().powi(2)).collect();
    // cumulative trapezoid
    let mut cum = vec![0.0; times.len()];
    for i in 1..times.len() {
        cum[i] = cum[i - 1] + 0.5 * (h2[i] + h2[i - 1]) * (times[i] - times[i - 1]);
    }
    let mut best: f64 = 0.0;
    let mut hi = 0;
    for lo in 0..times.len() {
        while hi + 1 < times.len() && times[hi + 1] <= times[lo] + 1.0 + 1e-12 {
            hi += 1;
        }
        best = best.max(cum[hi] - cum[lo]);
    }
    best
}

/// Absorbing radius: twice the largest `H¹` norm over `t ∈ [t_lo, t_hi]`
/// across the given trajectories.
pub fn absorbing_radius<T: Real>(trajs: &[Trajectory<T>], t_lo: f64, t_hi: f64) -> f64 {
    let mut sup: f64 = 0.0;
    for tr in trajs {
        for (t, u) in tr.times.iter().zip(&tr.states) {
            let t = t.f64();
            if t >= t_lo && t <= t_hi {
                sup = sup.max(u.h1_norm().f64());
            }
        }
    }
    2.0 * sup
}

/// [`absorbing_radius`] from precomputed `(times, norms)` series.
pub fn absorbing_radius_by(series: &[(Vec<f64>, Vec<f64>)], t_lo: f64, t_hi: f64) -> f64 {
    let sup = series
        .iter()
        .flat_map(|(ts, ns)| ts.iter().zip(ns))
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .fold(0.0_f64, |a, (_, n)| a.max(*n));
    2.0 * sup
}

/// First recorded time after which the trajectory stays in the ball of the
/// given radius, or `None` if it is outside at the final instant.
pub fn entry_time<T: Real>(traj: &Trajectory<T>, radius: f64) -> Option<f64> {
    let mut entry = None;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        if u.h1_norm().f64() <= radius {
            entry.get_or_insert(t.f64());
        } else {
            entry = None;
        }
    }
    entry
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::presets;

    #[test]
    fn phi1_small_argument() {
        assert_eq!(phi1(0.0f64), 1.0);
        let x = 1e-3f64;
        assert!((phi1(x) - (1.0 - (-x).exp()) / x).abs() < 1e-13);
    }

    #[test]
    fn heat_equation_is_exact() {
        let grid = Grid::new(16, std::f64::consts::PI).unwrap();
        let u0 = SpectralField::mode(BasisKind::DirichletSine, std::f64::consts::PI, 1, 16, 0, 1).unwrap();
        let tr = evolve(&u0, 1.0, 1e-3, &presets::zero::<f64>(1), &grid).unwrap();
        let u = tr.last().unwrap();
        assert!((u.component(0)[0] - (-1.0f64).exp()).abs() < 1e-12);
        let rep = dissipative_monitor(&tr).unwrap();
        assert_eq!(rep.c_star, 0.0);
        assert!(rep.alpha >= 1.0 - 1e-12);
        assert_eq!(admissible_c_star(&tr, 1.0, 1.0), 0.0);
    }

    #[test]
    fn rhs_rejects_neumann() {
        let grid = Grid::new(8, 1.0).unwrap();
        let u = SpectralField::zeros(BasisKind::NeumannCosine, 1.0, 1, 8);
        assert!(matches!(
            rda_rhs(&u, &presets::zero::<f64>(1), &grid),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn entry_time_requires_staying_inside() {
        let u = |s: f64| SpectralField::from_coeffs(BasisKind::DirichletSine, 1.0, 1, 1, vec![s]).unwrap();
        let tr = Trajectory {
            times: vec![0.0, 1.0, 2.0, 3.0],
            states: vec![u(0.01), u(5.0), u(0.01), u(0.01)],
            dt: 1.0,
        };
        assert_eq!(entry_time(&tr, 1.0), Some(2.0));
    }
}
