//! Reductions of problems the Dirichlet theory does not cover directly.
//!
//! Neumann conditions: `∂ₜu + f(u)∂ₓu + g(u) = ∂²ₓu − u` with `∂ₓu = 0` at
//! the ends is embedded, via `w = ∂ₓu`, into the mixed system
//!
//! ```text
//! ∂ₜu + f(u)w + g(u)                    = ∂²ₓu − u,   ∂ₓu = 0 at x = 0, L
//! ∂ₜw + f'(u)[w,w] + g'(u)w + f(u)∂ₓw   = ∂²ₓw − w,   w = 0 at x = 0, L
//! ```
//!
//! in which only the Dirichlet component `w` carries an advection term and
//! is transformed by `w = a(u)v`. Gradient nonlinearities `f(u, ∂ₓu)` are
//! handled in [`elliptic`].

pub mod elliptic;
mod pipeline;

pub use pipeline::{embedding_audit, neumann_manifold_pipeline, EmbeddingAudit, NeumannPipelineReport};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffeo::Diffeo;
use crate::dynamics::exp_euler_step;
use crate::error::{Error, Result};
use crate::manifold::Forcing;
use crate::matrix::{matmul, matvec, rk4_matrix_system, MatrixField};
use crate::nonlinearity::{Bump, Nonlinearity};
use crate::scalar::Real;
use crate::spectral::{BasisKind, Block, Grid, Samples, SpectralField};
use crate::transformed::CutoffSpec;

pub use elliptic::{
    fd_rhs, fnd_rhs, general_system_rhs, rred_rhs, t1, t2, upsilon_derivative, upsilon_solve, EllipticConfig,
    GradientBounds, UpsilonSolution,
};

/// Default radius of the joint `(u, w)` cut-off applied to `f'(u)[w, w]`.
pub const QUADRATIC_CUTOFF_RADIUS: f64 = 8.0;

/// `(u, ∂ₓu)` for a Neumann field `u`.
pub fn embed<T: Real>(u: &SpectralField<T>) -> Result<Block<T>> {
    if u.basis() != BasisKind::NeumannCosine {
        return Err(Error::BasisMismatch("embed expects a Neumann field".into()));
    }
    Ok(Block { parts: vec![u.clone(), u.derivative()] })
}

fn check_extended<T: Real>(state: &Block<T>, m: usize) -> Result<()> {
    if state.parts.len() != 2 {
        return Err(Error::SizeMismatch { expected: 2, got: state.parts.len() });
    }
    if state.parts[0].basis() != BasisKind::NeumannCosine || state.parts[1].basis() != BasisKind::DirichletSine {
        return Err(Error::BasisMismatch("extended state is (Neumann u, Dirichlet w)".into()));
    }
    for p in &state.parts {
        if p.m() != m {
            return Err(Error::SizeMismatch { expected: m, got: p.m() });
        }
    }
    Ok(())
}

/// Pointwise workspace for `f`, `f'`, `g`, `g'`.
struct Work<T> {
    m: usize,
    f: Vec<T>,
    df: Vec<T>,
    g: Vec<T>,
    dg: Vec<T>,
}

impl<T: Real> Work<T> {
    fn new(m: usize) -> Self {
        let z = |n: usize| vec![T::zero(); n];
        Work { m, f: z(m * m), df: z(m * m * m), g: z(m), dg: z(m * m) }
    }

    fn load<N: Nonlinearity<T> + ?Sized>(&mut self, nl: &N, u: &[T]) {
        nl.f(u, &mut self.f);
        nl.df(u, &mut self.df);
        nl.g(u, &mut self.g);
        nl.dg(u, &mut self.dg);
    }

    /// `χ(|(u, w)|) f'(u)[w, w] + g'(u)w`.
    fn quadratic(&self, bump: &Bump<T>, u: &[T], w: &[T], out: &mut [T]) {
        let m = self.m;
        let joint: Vec<T> = u.iter().chain(w).copied().collect();
        let chi = bump.value(&joint);
        for i in 0..m {
            let mut s = T::zero();
            for j in 0..m {
                let fij: T = (0..m).map(|l| self.df[(i * m + j) * m + l] * w[l]).sum();
                s += fij * w[j];
            }
            out[i] = chi * s + (0..m).map(|l| self.dg[i * m + l] * w[l]).sum::<T>();
        }
    }
}

/// The mixed `(u, w)` system with a cut-off on the quadratic term.
#[derive(Clone)]
pub struct ExtendedSystem<T: Real, N> {
    pub nl: N,
    pub grid: Arc<Grid<T>>,
    pub quad_cutoff: Bump<T>,
}

impl<T: Real, N: Nonlinearity<T>> ExtendedSystem<T, N> {
    pub fn new(nl: N, grid: Arc<Grid<T>>) -> Self {
        ExtendedSystem { nl, grid, quad_cutoff: Bump { radius: T::lit(QUADRATIC_CUTOFF_RADIUS) } }
    }

    /// Nonlinear part: `(−f(u)w − g(u), −χ f'(u)[w,w] − g'(u)w − f(u)∂ₓw)`.
    pub fn nonlinear(&self, state: &Block<T>) -> Result<Block<T>> {
        let m = self.nl.m();
        check_extended(state, m)?;
        let grid = &self.grid;
        let (u, w) = (&state.parts[0], &state.parts[1]);
        let us = grid.synthesize(u)?;
        let ws = grid.synthesize(w)?;
        let wxs = grid.synthesize(&w.derivative())?;
        let mut ou = Samples::zeros(m, us.nodes);
        let mut ow = Samples::zeros(m, us.nodes);
        let mut wk = Work::new(m);
        let (mut uj, mut wj, mut wxj) = (vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m]);
        let (mut y, mut q, mut t) = (vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m]);
        for j in 0..us.nodes {
            us.gather(j, &mut uj);
            ws.gather(j, &mut wj);
            wxs.gather(j, &mut wxj);
            wk.load(&self.nl, &uj);
            matvec(&wk.f, &wj, &mut t, m);
            for i in 0..m {
                y[i] = -t[i] - wk.g[i];
            }
            ou.scatter(j, &y);
            wk.quadratic(&self.quad_cutoff, &uj, &wj, &mut q);
            matvec(&wk.f, &wxj, &mut t, m);
            for i in 0..m {
                y[i] = -q[i] - t[i];
            }
            ow.scatter(j, &y);
        }
        Ok(Block {
            parts: vec![grid.analyze(&ou, BasisKind::NeumannCosine)?, grid.analyze(&ow, BasisKind::DirichletSine)?],
        })
    }

    /// Full right-hand side, linear part `∂²ₓ − 1` on both components.
    pub fn rhs(&self, state: &Block<T>) -> Result<Block<T>> {
        let mut n = self.nonlinear(state)?;
        for (p, x) in n.parts.iter_mut().zip(&state.parts) {
            p.axpy(T::one(), &x.second_derivative())?;
            p.axpy(-T::one(), x)?;
        }
        Ok(n)
    }

    /// Exponential-Euler trajectory recording every `stride`-th step.
    pub fn evolve(&self, state0: &Block<T>, t_final: T, dt: T, stride: usize) -> Result<BlockTrajectory<T>> {
        evolve_block(state0, t_final, dt, stride, |s| self.nonlinear(s))
    }
}

/// Right-hand side of the mixed system for one state (free-function form).
pub fn extended_rhs_4n<T: Real, N: Nonlinearity<T> + Clone>(
    nl: &N,
    grid: &Arc<Grid<T>>,
    state: &Block<T>,
) -> Result<Block<T>> {
    ExtendedSystem::new(nl.clone(), grid.clone()).rhs(state)
}

/// Recorded states of a block system.
#[derive(Debug, Clone)]
pub struct BlockTrajectory<T> {
    pub times: Vec<f64>,
    pub states: Vec<Block<T>>,
    pub dt: f64,
}

/// Exponential Euler with linear part `∂²ₓ − 1` on every part.
pub fn evolve_block<T: Real, F>(
    state0: &Block<T>,
    t_final: T,
    dt: T,
    stride: usize,
    mut nonlinear: F,
) -> Result<BlockTrajectory<T>>
where
    F: FnMut(&Block<T>) -> Result<Block<T>>,
{
    if !(dt > T::zero()) || t_final < T::zero() {
        return Err(Error::Configuration("need dt > 0 and T ≥ 0".into()));
    }
    let steps = (t_final / dt).round().to_usize().unwrap_or(0);
    let stride = stride.max(1);
    let mut s = state0.clone();
    let mut times = vec![0.0];
    let mut states = vec![s.clone()];
    for k in 1..=steps {
        let n = nonlinear(&s)?;
        let parts = s.parts.iter().zip(&n.parts).map(|(x, y)| exp_euler_step(x, y, dt, T::one())).collect::<Result<_>>()?;
        s = Block { parts };
        let t = dt.f64() * k as f64;
        if !s.is_finite() || s.h1_norm().f64() > 1e12 {
            return Err(Error::IntegrationBlowup { time: t });
        }
        if k % stride == 0 || k == steps {
            times.push(t);
            states.push(s.clone());
        }
    }
    Ok(BlockTrajectory { times, states, dt: dt.f64() })
}

/// `‖w − ∂ₓu‖_{L²}` along a trajectory of the mixed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub times: Vec<f64>,
    pub drift: Vec<f64>,
    /// Least-squares slope of drift against time.
    pub slope: f64,
    pub dt: f64,
}

pub fn constraint_drift<T: Real>(traj: &BlockTrajectory<T>) -> Result<DriftReport> {
    let drift: Vec<f64> = traj
        .states
        .iter()
        .map(|s| Ok(s.parts[1].sub(&s.parts[0].derivative())?.l2_norm().f64()))
        .collect::<Result<_>>()?;
    let n = drift.len() as f64;
    let mt = traj.times.iter().sum::<f64>() / n;
    let md = drift.iter().sum::<f64>() / n;
    let sxy: f64 = traj.times.iter().zip(&drift).map(|(t, d)| (t - mt) * (d - md)).sum();
    let sxx: f64 = traj.times.iter().map(|t| (t - mt) * (t - mt)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(DriftReport { times: traj.times.clone(), drift, slope, dt: traj.dt })
}

/// The mixed system after `w = a(u)v`, with `∂ₓa = ½f(P_K u)a` and `P_K`
/// the projection onto the first `K` Neumann modes. State `(u, v)`.
pub struct NeumannTransformed<T: Real, N> {
    pub system: ExtendedSystem<T, N>,
    diffeo: Diffeo<T, N>,
    pub cutoff: CutoffSpec<T>,
}

/// Which terms of the transformed nonlinearity to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// `a⁻¹[f(P_K u) − f(u)]a ∂ₓv`, the small advection term.
    Advection,
    /// Everything else.
    Rest,
    All,
}

impl<T: Real, N: Nonlinearity<T> + Clone> NeumannTransformed<T, N> {
    pub fn new(nl: N, grid: Arc<Grid<T>>, k: usize, cutoff: CutoffSpec<T>) -> Result<Self> {
        let diffeo = Diffeo::new(nl.clone(), grid.clone(), k)?;
        Ok(NeumannTransformed { system: ExtendedSystem::new(nl, grid), diffeo, cutoff })
    }

    pub fn k(&self) -> usize {
        self.diffeo.k()
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.system.grid
    }

    /// `a(u)` for a Neumann field `u`.
    pub fn kernel(&self, u: &SpectralField<T>) -> Result<MatrixField<T>> {
        self.diffeo.kernel_from_projected(&u.project_low(self.k().min(u.count()))?)
    }

    /// `(u, w) ↦ (u, a(u)⁻¹w)`.
    pub fn forward(&self, state: &Block<T>) -> Result<Block<T>> {
        check_extended(state, self.system.nl.m())?;
        let a = self.kernel(&state.parts[0])?.pointwise_inverse()?;
        Ok(Block { parts: vec![state.parts[0].clone(), self.apply(&a, &state.parts[1])?] })
    }

    /// `(u, v) ↦ (u, a(u)v)`.
    pub fn inverse(&self, state: &Block<T>) -> Result<Block<T>> {
        check_extended(state, self.system.nl.m())?;
        let a = self.kernel(&state.parts[0])?;
        Ok(Block { parts: vec![state.parts[0].clone(), self.apply(&a, &state.parts[1])?] })
    }

    fn apply(&self, a: &MatrixField<T>, v: &SpectralField<T>) -> Result<SpectralField<T>> {
        let grid = self.grid();
        let m = v.m();
        let vs = grid.synthesize(v)?;
        let mut out = vs.clone();
        let (mut x, mut y) = (vec![T::zero(); m], vec![T::zero(); m]);
        for j in 0..vs.nodes {
            vs.gather(j, &mut x);
            matvec(a.at(j), &x, &mut y, m);
            out.scatter(j, &y);
        }
        grid.analyze(&out, v.basis())
    }

    /// Cut-off nonlinearity of the transformed `(u, v)` system.
    pub fn nonlinear(&self, state: &Block<T>, part: Part) -> Result<Block<T>> {
        let nl = &self.system.nl;
        let m = nl.m();
        check_extended(state, m)?;
        let phi = self.cutoff.phi(state.h1_norm_sq());
        if phi == T::zero() {
            return Ok(state.zeros_like());
        }
        let grid = self.grid();
        let mm = m * m;
        let (u, v) = (&state.parts[0], &state.parts[1]);
        let p = u.project_low(self.k().min(u.count()))?;
        let a = self.diffeo.kernel_from_projected(&p)?;
        let a_inv = a.pointwise_inverse()?;
        let us = grid.synthesize(u)?;
        let vs = grid.synthesize(v)?;
        let vxs = grid.synthesize(&v.derivative())?;
        let nodes = us.nodes;
        // w = a v on the grid
        let mut ws = vs.clone();
        let (mut x, mut y) = (vec![T::zero(); m], vec![T::zero(); m]);
        for j in 0..nodes {
            vs.gather(j, &mut x);
            matvec(a.at(j), &x, &mut y, m);
            ws.scatter(j, &y);
        }
        let mut wk = Work::new(m);
        let mut uj = vec![T::zero(); m];
        let mut wj = vec![T::zero(); m];
        // u-equation nonlinearity −f(u)w − g(u)
        let mut nu = Samples::zeros(m, nodes);
        for j in 0..nodes {
            us.gather(j, &mut uj);
            ws.gather(j, &mut wj);
            wk.load(nl, &uj);
            matvec(&wk.f, &wj, &mut y, m);
            for i in 0..m {
                y[i] = -y[i] - wk.g[i];
            }
            nu.scatter(j, &y);
        }
        let nu_k = grid.analyze(&nu, BasisKind::NeumannCosine)?;
        let want_adv = part != Part::Rest;
        let want_rest = part != Part::Advection;
        let mut nv = Samples::zeros(m, nodes);
        let p_fine = grid.synthesize_on(&p, 2 * grid.intervals());
        let (mut pj, mut vj, mut vxj, mut z) = (vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m]);
        let (mut fp, mut fu, mut t1, mut t2) = (vec![T::zero(); mm], vec![T::zero(); mm], vec![T::zero(); mm], vec![T::zero(); mm]);
        let mut q = vec![T::zero(); m];
        let dt_a = if want_rest {
            // P_K ∂ₜu with ∂ₜu = ∂²ₓu − u + N_u
            let mut ut = u.second_derivative();
            ut.axpy(-T::one(), u)?;
            ut.axpy(T::one(), &nu_k)?;
            let pk_ut = ut.project_low(self.k().min(ut.count()))?;
            Some(self.dt_a(&p_fine, &pk_ut)?)
        } else {
            None
        };
        let dps = grid.synthesize(&p.derivative())?;
        let half = T::lit(0.5);
        for j in 0..nodes {
            p_fine.gather(2 * j, &mut pj);
            us.gather(j, &mut uj);
            vs.gather(j, &mut vj);
            vxs.gather(j, &mut vxj);
            ws.gather(j, &mut wj);
            nl.f(&pj, &mut fp);
            wk.load(nl, &uj);
            fu.copy_from_slice(&wk.f);
            let mut acc = vec![T::zero(); m];
            if want_adv {
                for i in 0..mm {
                    t1[i] = fp[i] - fu[i];
                }
                // a⁻¹ [f(P) − f(u)] a ∂ₓv
                matmul(&t1, a.at(j), &mut t2, m);
                let mut t3 = vec![T::zero(); mm];
                matmul(a_inv.at(j), &t2, &mut t3, m);
                matvec(&t3, &vxj, &mut z, m);
                for i in 0..m {
                    acc[i] += z[i];
                }
            }
            if want_rest {
                let da = a.deriv_at(j);
                let aj = a.at(j);
                let mut dpj = vec![T::zero(); m];
                dps.gather(j, &mut dpj);
                let mut fpd = vec![T::zero(); mm];
                nl.df_dir(&pj, &dpj, &mut fpd);
                // a'' − ∂ₜa − f(u)a'
                matmul(&fp, da, &mut t1, m);
                matmul(&fpd, aj, &mut t2, m);
                let dta = dt_a.as_ref().expect("computed when requested").at(j);
                let mut mat = vec![T::zero(); mm];
                for i in 0..mm {
                    mat[i] = half * (t1[i] + t2[i]) - dta[i];
                }
                matmul(&fu, da, &mut t1, m);
                for i in 0..mm {
                    mat[i] -= t1[i];
                }
                matvec(&mat, &vj, &mut z, m);
                wk.quadratic(&self.system.quad_cutoff, &uj, &wj, &mut q);
                for i in 0..m {
                    z[i] -= q[i];
                }
                matvec(a_inv.at(j), &z, &mut y, m);
                for i in 0..m {
                    acc[i] += y[i];
                }
            }
            nv.scatter(j, &acc);
        }
        let nu_out = if want_rest { nu_k.scale(phi) } else { nu_k.zeros_like() };
        Ok(Block { parts: vec![nu_out, grid.analyze(&nv, BasisKind::DirichletSine)?.scale(phi)] })
    }

    /// `∂ₜa` from `∂ₓ(∂ₜa) = ½f(P)∂ₜa + ½f'(P)[P_K∂ₜu]a`, `∂ₜa(0) = 0`.
    fn dt_a(&self, p_fine: &Samples<T>, pk_ut: &SpectralField<T>) -> Result<MatrixField<T>> {
        let grid = self.grid();
        let nl = &self.system.nl;
        let m = nl.m();
        let mm = m * m;
        let ut_fine = grid.synthesize_on(pk_ut, 2 * grid.intervals());
        let nf = p_fine.nodes;
        let mut coef = vec![T::zero(); nf * mm];
        let mut c = vec![T::zero(); nf * mm];
        let (mut pj, mut hj) = (vec![T::zero(); m], vec![T::zero(); m]);
        for j in 0..nf {
            p_fine.gather(j, &mut pj);
            ut_fine.gather(j, &mut hj);
            nl.f(&pj, &mut coef[j * mm..(j + 1) * mm]);
            nl.df_dir(&pj, &hj, &mut c[j * mm..(j + 1) * mm]);
        }
        let half = T::lit(0.5);
        coef.iter_mut().chain(c.iter_mut()).for_each(|x| *x *= half);
        let (_, _, b) = rk4_matrix_system(m, grid.intervals(), grid.length(), &coef, Some(&c));
        let (values, deriv) = b.expect("inhomogeneous block requested");
        Ok(MatrixField { m, length: grid.length(), nodes: grid.intervals() + 1, values, deriv })
    }

    /// Exponential-Euler trajectory of the transformed system.
    pub fn evolve(&self, state0: &Block<T>, t_final: T, dt: T, stride: usize) -> Result<BlockTrajectory<T>> {
        evolve_block(state0, t_final, dt, stride, |s| self.nonlinear(s, Part::All))
    }
}

impl<T: Real, N: Nonlinearity<T> + Clone> Forcing<T> for NeumannTransformed<T, N> {
    type Warm = ();

    fn template(&self) -> Block<T> {
        let g = self.grid();
        let m = self.system.nl.m();
        Block {
            parts: vec![
                SpectralField::zeros(BasisKind::NeumannCosine, g.length(), m, g.n_modes()),
                SpectralField::zeros(BasisKind::DirichletSine, g.length(), m, g.n_modes()),
            ],
        }
    }

    fn shift(&self, _part: usize) -> T {
        T::one()
    }

    fn support_radius(&self) -> Option<T> {
        Some(self.cutoff.r)
    }

    fn eval(&self, v: &Block<T>, _: Option<&()>) -> Result<(Block<T>, Option<()>)> {
        Ok((self.nonlinear(v, Part::All)?, None))
    }
}
