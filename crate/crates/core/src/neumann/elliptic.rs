//! The elliptic solution operator `Υ: h ↦ u`,
//!
//! ```text
//! ∂²ₓu − (1 + N)u − f(u, ∂ₓu) = h,   u(0) = u(L) = 0,
//! ```
//!
//! its linearization `Υ'`, the smoothing operators `𝕋₁`, `𝕋₂`, and the
//! right-hand sides of the systems obtained by differentiating
//! `∂ₜu + f(u, ∂ₓu) = ∂²ₓu − u` in space or in time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::GradientNonlinearity;
use crate::sampling;
use crate::scalar::Real;
use crate::spectral::{BasisKind, Block, Grid, Samples, SpectralField};

/// Parameters of the Newton solve for `Υ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticConfig {
    /// The shift `N`.
    pub n_shift: f64,
    /// Residual tolerance (`L²` norm of the Galerkin residual).
    pub tol: f64,
    pub max_newton: usize,
    pub max_inner: usize,
}

/// `C_f = sup |f_u|` and `C_f' = sup |f_p|` (Frobenius norms) over the support box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBounds {
    pub c_f: f64,
    pub c_fp: f64,
}

impl GradientBounds {
    /// `C_f + (C_f')²/2 + ½`, the smallest admissible shift.
    pub fn threshold(&self) -> f64 {
        self.c_f + 0.5 * self.c_fp * self.c_fp + 0.5
    }
}

/// Dense random sampling of `f_u`, `f_p` over `[−R, R]^{2m}`.
pub fn measure_gradient_bounds<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    nl: &G,
    seed: u64,
    samples: usize,
) -> GradientBounds {
    let m = nl.m();
    let r = nl.support_radius().f64();
    let mut rng = sampling::rng(seed);
    let mut u = vec![T::zero(); m];
    let mut p = vec![T::zero(); m];
    let mut fu = vec![T::zero(); m * m];
    let mut fp = vec![T::zero(); m * m];
    let mut b = GradientBounds { c_f: 0.0, c_fp: 0.0 };
    let fro = |a: &[T]| a.iter().map(|x| x.f64() * x.f64()).sum::<f64>().sqrt();
    for _ in 0..samples {
        for i in 0..m {
            u[i] = T::lit(rng.gen_range(-r..r));
            p[i] = T::lit(rng.gen_range(-r..r));
        }
        nl.f_u(&u, &p, &mut fu);
        nl.f_p(&u, &p, &mut fp);
        b.c_f = b.c_f.max(fro(&fu));
        b.c_fp = b.c_fp.max(fro(&fp));
    }
    b
}

impl EllipticConfig {
    /// `N = 2·(C_f + (C_f')²/2 + ½)` from sampled bounds, tolerance `1e-10`.
    pub fn for_nonlinearity<T: Real, G: GradientNonlinearity<T> + ?Sized>(nl: &G, seed: u64) -> Self {
        let b = measure_gradient_bounds(nl, seed, 20_000);
        EllipticConfig { n_shift: 2.0 * b.threshold(), tol: 1e-10, max_newton: 20, max_inner: 500 }
    }
}

/// Outcome of one `Υ` solve.
#[derive(Debug, Clone)]
pub struct UpsilonSolution<T> {
    pub u: SpectralField<T>,
    /// `L²` norm of the Galerkin residual.
    pub residual: f64,
    pub newton_iterations: usize,
}

/// Outcome of [`upsilon_audit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsilonAudit {
    pub n_shift: f64,
    pub threshold: f64,
    pub pairs: usize,
    pub max_residual: f64,
    pub max_newton: usize,
    /// Largest `‖u₁ − u₂‖_{H¹} / ‖h₁ − h₂‖_{L²}`.
    pub max_ratio: f64,
    pub violations: usize,
}

/// Solves `Υ` on `pairs` random pairs of right-hand sides with `H¹` norm up
/// to `scale` and checks `‖u₁ − u₂‖_{H¹} ≤ ‖h₁ − h₂‖_{L²}`.
pub fn upsilon_audit<G: GradientNonlinearity<f64> + ?Sized>(
    grid: &Grid<f64>,
    nl: &G,
    cfg: &EllipticConfig,
    pairs: usize,
    scale: f64,
    seed: u64,
) -> Result<UpsilonAudit> {
    let mut rng = sampling::rng(seed);
    let (length, m, n) = (grid.length(), nl.m(), grid.n_modes());
    let spectrum = sampling::Spectrum::Smooth { decay: 1.0, max_mode: n };
    let threshold = measure_gradient_bounds(nl, seed, 20_000).threshold();
    let mut audit = UpsilonAudit {
        n_shift: cfg.n_shift,
        threshold,
        pairs,
        max_residual: 0.0,
        max_newton: 0,
        max_ratio: 0.0,
        violations: 0,
    };
    for _ in 0..pairs {
        let h1 = sampling::random_in_ball(&mut rng, BasisKind::DirichletSine, length, m, n, spectrum, scale);
        let h2 = sampling::random_in_ball(&mut rng, BasisKind::DirichletSine, length, m, n, spectrum, scale);
        let s1 = upsilon_solve(grid, nl, &h1, cfg)?;
        let s2 = upsilon_solve(grid, nl, &h2, cfg)?;
        for s in [&s1, &s2] {
            audit.max_residual = audit.max_residual.max(s.residual);
            audit.max_newton = audit.max_newton.max(s.newton_iterations);
        }
        let den = h1.sub(&h2)?.l2_norm();
        if den > 0.0 {
            let ratio = s1.u.sub(&s2.u)?.h1_norm() / den;
            audit.max_ratio = audit.max_ratio.max(ratio);
            if ratio > 1.0 {
                audit.violations += 1;
            }
        }
    }
    Ok(audit)
}

/// Pointwise `f`, `f_u`, `f_p` of a Dirichlet field on the grid.
struct Frozen<T> {
    m: usize,
    fu: Vec<T>,
    fp: Vec<T>,
}

fn sample_pair<T: Real>(grid: &Grid<T>, u: &SpectralField<T>) -> Result<(Samples<T>, Samples<T>)> {
    Ok((grid.synthesize(u)?, grid.synthesize(&u.derivative())?))
}

fn eval_f<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    nl: &G,
    us: &Samples<T>,
    ps: &Samples<T>,
    want_derivs: bool,
) -> (Samples<T>, Option<Frozen<T>>) {
    let m = us.m;
    let nodes = us.nodes;
    let mut out = Samples::zeros(m, nodes);
    let mut fu = vec![T::zero(); if want_derivs { nodes * m * m } else { 0 }];
    let mut fp = fu.clone();
    let mut uj = vec![T::zero(); m];
    let mut pj = vec![T::zero(); m];
    let mut fj = vec![T::zero(); m];
    for j in 0..nodes {
        us.gather(j, &mut uj);
        ps.gather(j, &mut pj);
        nl.f(&uj, &pj, &mut fj);
        out.scatter(j, &fj);
        if want_derivs {
            nl.f_u(&uj, &pj, &mut fu[j * m * m..(j + 1) * m * m]);
            nl.f_p(&uj, &pj, &mut fp[j * m * m..(j + 1) * m * m]);
        }
    }
    (out, want_derivs.then_some(Frozen { m, fu, fp }))
}

impl<T: Real> Frozen<T> {
    /// `f_u δ + f_p δ_x` at the nodes.
    fn apply(&self, grid: &Grid<T>, d: &SpectralField<T>) -> Result<Samples<T>> {
        let m = self.m;
        let (ds, dxs) = sample_pair(grid, d)?;
        let mut out = Samples::zeros(m, ds.nodes);
        let mut a = vec![T::zero(); m];
        let mut b = vec![T::zero(); m];
        let mut y = vec![T::zero(); m];
        for j in 0..ds.nodes {
            ds.gather(j, &mut a);
            dxs.gather(j, &mut b);
            let fu = &self.fu[j * m * m..(j + 1) * m * m];
            let fp = &self.fp[j * m * m..(j + 1) * m * m];
            for i in 0..m {
                y[i] = (0..m).map(|l| fu[i * m + l] * a[l] + fp[i * m + l] * b[l]).sum();
            }
            out.scatter(j, &y);
        }
        Ok(out)
    }
}

/// Modewise `x ↦ −x/(λ_k + 1 + N)`, the inverse of `∂²ₓ − (1 + N)`.
fn diag_solve<T: Real>(x: &SpectralField<T>, shift: T) -> SpectralField<T> {
    let mut out = x.clone();
    let count = x.count();
    for c in 0..x.m() {
        let comp = out.component_mut(c);
        for i in 0..count {
            comp[i] = -comp[i] / (x.eigen(i) + T::one() + shift);
        }
    }
    out
}

/// Solves `∂²ₓδ − (1 + N)δ − f_uδ − f_pδ_x = rhs` by the fixed point
/// `δ ← D⁻¹(rhs + f_uδ + f_pδ_x)`.
fn linear_solve<T: Real>(
    grid: &Grid<T>,
    frozen: &Frozen<T>,
    rhs: &SpectralField<T>,
    cfg: &EllipticConfig,
) -> Result<SpectralField<T>> {
    let shift = T::lit(cfg.n_shift);
    let mut d = diag_solve(rhs, shift);
    let mut prev = f64::INFINITY;
    for _ in 0..cfg.max_inner {
        let pert = grid.analyze(&frozen.apply(grid, &d)?, BasisKind::DirichletSine)?;
        let next = diag_solve(&rhs.add(&pert)?, shift);
        let inc = next.sub(&d)?.h1_norm().f64();
        d = next;
        if inc <= 1e-15 * (1.0 + d.h1_norm().f64()) {
            return Ok(d);
        }
        if inc > prev && inc > 1e3 * prev.max(1e-300) {
            break;
        }
        prev = inc;
    }
    Err(Error::Solver(format!(
        "linearized elliptic solve did not converge for N = {}; raise N_shift",
        cfg.n_shift
    )))
}

fn residual<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    u: &SpectralField<T>,
    h: &SpectralField<T>,
    shift: T,
    want_derivs: bool,
) -> Result<(SpectralField<T>, Option<Frozen<T>>)> {
    let (us, ps) = sample_pair(grid, u)?;
    let (fs, frozen) = eval_f(nl, &us, &ps, want_derivs);
    let fk = grid.analyze(&fs, BasisKind::DirichletSine)?;
    let mut r = u.second_derivative();
    r.axpy(-(T::one() + shift), u)?;
    r.axpy(-T::one(), &fk)?;
    r.axpy(-T::one(), h)?;
    Ok((r, frozen))
}

/// `Υ(h)` by Newton's method.
pub fn upsilon_solve<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    h: &SpectralField<T>,
    cfg: &EllipticConfig,
) -> Result<UpsilonSolution<T>> {
    if h.basis() != BasisKind::DirichletSine {
        return Err(Error::BasisMismatch("Υ expects a Dirichlet right-hand side".into()));
    }
    if h.m() != nl.m() {
        return Err(Error::SizeMismatch { expected: nl.m(), got: h.m() });
    }
    let shift = T::lit(cfg.n_shift);
    let mut u = diag_solve(h, shift);
    for it in 0..=cfg.max_newton {
        let (r, frozen) = residual(grid, nl, &u, h, shift, true)?;
        let res = r.l2_norm().f64();
        if !res.is_finite() {
            return Err(Error::Solver("Υ Newton iteration produced non-finite values".into()));
        }
        if res <= cfg.tol {
            return Ok(UpsilonSolution { u, residual: res, newton_iterations: it });
        }
        if it == cfg.max_newton {
            break;
        }
        let step = linear_solve(grid, frozen.as_ref().expect("derivatives requested"), &r.scale(-T::one()), cfg)?;
        u = u.add(&step)?;
    }
    Err(Error::Solver(format!(
        "Υ Newton stagnated after {} iterations (N = {}); raise N_shift",
        cfg.max_newton, cfg.n_shift
    )))
}

/// `Υ'(h)η`: the linearized problem at `Υ(h)` with right-hand side `η`.
pub fn upsilon_derivative<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    u: &SpectralField<T>,
    eta: &SpectralField<T>,
    cfg: &EllipticConfig,
) -> Result<SpectralField<T>> {
    let (us, ps) = sample_pair(grid, u)?;
    let (_, frozen) = eval_f(nl, &us, &ps, true);
    linear_solve(grid, frozen.as_ref().expect("derivatives requested"), eta, cfg)
}

/// `𝕋₁(u, w) = ∂ₓΥ(w − Nu)` together with `Υ(w − Nu)`.
pub fn t1<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    u: &SpectralField<T>,
    w: &SpectralField<T>,
    cfg: &EllipticConfig,
) -> Result<(SpectralField<T>, SpectralField<T>)> {
    let mut h = w.clone();
    h.axpy(-T::lit(cfg.n_shift), u)?;
    let sol = upsilon_solve(grid, nl, &h, cfg)?;
    Ok((sol.u.derivative(), sol.u))
}

/// `𝕋₂(u, w, θ) = ∂ₓ[Υ'(w − Nu)(θ − Nw)]`; `ups` is `Υ(w − Nu)`.
pub fn t2<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    ups: &SpectralField<T>,
    w: &SpectralField<T>,
    theta: &SpectralField<T>,
    cfg: &EllipticConfig,
) -> Result<SpectralField<T>> {
    let mut eta = theta.clone();
    eta.axpy(-T::lit(cfg.n_shift), w)?;
    Ok(upsilon_derivative(grid, nl, ups, &eta, cfg)?.derivative())
}

/// Pointwise pieces of `f` and its derivatives at `(u, p)` contracted with
/// the given directions.
struct Pointwise<T> {
    m: usize,
    f: Vec<T>,
    fu: Vec<T>,
    fp: Vec<T>,
    fuu: Vec<T>,
    fup: Vec<T>,
    fpp: Vec<T>,
}

impl<T: Real> Pointwise<T> {
    fn new(m: usize) -> Self {
        let z = |n: usize| vec![T::zero(); n];
        Pointwise { m, f: z(m), fu: z(m * m), fp: z(m * m), fuu: z(m * m * m), fup: z(m * m * m), fpp: z(m * m * m) }
    }

    fn load<G: GradientNonlinearity<T> + ?Sized>(&mut self, nl: &G, u: &[T], p: &[T], second: bool) {
        nl.f(u, p, &mut self.f);
        nl.f_u(u, p, &mut self.fu);
        nl.f_p(u, p, &mut self.fp);
        if second {
            nl.f_uu(u, p, &mut self.fuu);
            nl.f_up(u, p, &mut self.fup);
            nl.f_pp(u, p, &mut self.fpp);
        }
    }

    fn lin(&self, a: &[T], i: usize, x: &[T]) -> T {
        let m = self.m;
        (0..m).map(|l| a[i * m + l] * x[l]).sum()
    }

    fn quad(&self, a: &[T], i: usize, x: &[T], y: &[T]) -> T {
        let m = self.m;
        let mut s = T::zero();
        for l in 0..m {
            for r in 0..m {
                s += a[(i * m + l) * m + r] * x[l] * y[r];
            }
        }
        s
    }
}

fn gather_all<T: Real>(s: &[Samples<T>], j: usize, bufs: &mut [Vec<T>]) {
    for (src, b) in s.iter().zip(bufs.iter_mut()) {
        src.gather(j, b);
    }
}

/// Adds `∂²ₓ x − x` to a nonlinear part.
fn add_damped_heat<T: Real>(n: &mut SpectralField<T>, x: &SpectralField<T>) -> Result<()> {
    n.axpy(T::one(), &x.second_derivative())?;
    n.axpy(-T::one(), x)
}

fn check_parts<T: Real>(state: &Block<T>, bases: &[BasisKind], m: usize) -> Result<()> {
    if state.parts.len() != bases.len() {
        return Err(Error::SizeMismatch { expected: bases.len(), got: state.parts.len() });
    }
    for (p, &b) in state.parts.iter().zip(bases) {
        if p.basis() != b {
            return Err(Error::BasisMismatch(format!("expected {} component", b.name())));
        }
        if p.m() != m {
            return Err(Error::SizeMismatch { expected: m, got: p.m() });
        }
    }
    Ok(())
}

/// Nonlinear part of `∂ₜu = ∂²ₓu − u − f(u, ∂ₓu)` (Dirichlet), i.e. `−f(u, ∂ₓu)`.
pub fn fd_nonlinear<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    u: &SpectralField<T>,
) -> Result<SpectralField<T>> {
    let (us, ps) = sample_pair(grid, u)?;
    let (fs, _) = eval_f(nl, &us, &ps, false);
    Ok(grid.analyze(&fs, BasisKind::DirichletSine)?.scale(-T::one()))
}

/// Full right-hand side of the Dirichlet problem `∂ₜu = ∂²ₓu − u − f(u, ∂ₓu)`.
pub fn fd_rhs<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    u: &SpectralField<T>,
) -> Result<SpectralField<T>> {
    let mut n = fd_nonlinear(grid, nl, u)?;
    add_damped_heat(&mut n, u)?;
    Ok(n)
}

/// Checks `f(0, p) = 0` on `samples` random `p` in the support box.
pub fn vanishes_at_zero_u<T: Real, G: GradientNonlinearity<T> + ?Sized>(nl: &G, seed: u64, samples: usize) -> bool {
    let m = nl.m();
    let r = nl.support_radius().f64();
    let mut rng = sampling::rng(seed);
    let zero = vec![T::zero(); m];
    let mut p = vec![T::zero(); m];
    let mut f = vec![T::zero(); m];
    (0..samples).all(|_| {
        p.iter_mut().for_each(|x| *x = T::lit(rng.gen_range(-r..r)));
        nl.f(&zero, &p, &mut f);
        f.iter().all(|x| x.f64().abs() <= 1e-14)
    })
}

/// Nonlinear part of the x-differentiated system for `f(0, ·) ≡ 0`:
/// state `(u, w = ∂ₓu, θ = ∂ₓw)` with Dirichlet `u`, Neumann `w`, Dirichlet `θ`.
pub fn rred_nonlinear<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    state: &Block<T>,
) -> Result<Block<T>> {
    let m = nl.m();
    check_parts(state, &[BasisKind::DirichletSine, BasisKind::NeumannCosine, BasisKind::DirichletSine], m)?;
    if !vanishes_at_zero_u(nl, 17, 200) {
        return Err(Error::Precondition(
            "f(0, p) does not vanish; use the time-differentiated system (general_system_rhs)".into(),
        ));
    }
    let [u, w, th] = [&state.parts[0], &state.parts[1], &state.parts[2]];
    let s = [grid.synthesize(u)?, grid.synthesize(w)?, grid.synthesize(th)?, grid.synthesize(&th.derivative())?];
    let nodes = s[0].nodes;
    let mut out = [Samples::zeros(m, nodes), Samples::zeros(m, nodes), Samples::zeros(m, nodes)];
    let mut b = vec![vec![T::zero(); m]; 4];
    let mut pw = Pointwise::new(m);
    let two = T::lit(2.0);
    let mut y = vec![vec![T::zero(); m]; 3];
    for j in 0..nodes {
        gather_all(&s, j, &mut b);
        pw.load(nl, &b[0], &b[1], true);
        let (wj, tj, txj) = (&b[1], &b[2], &b[3]);
        for i in 0..m {
            y[0][i] = -pw.f[i];
            y[1][i] = -pw.lin(&pw.fu, i, wj) - pw.lin(&pw.fp, i, tj);
            y[2][i] = -pw.quad(&pw.fuu, i, wj, wj)
                - two * pw.quad(&pw.fup, i, wj, tj)
                - pw.quad(&pw.fpp, i, tj, tj)
                - pw.lin(&pw.fu, i, tj)
                - pw.lin(&pw.fp, i, txj);
        }
        for (o, yy) in out.iter_mut().zip(&y) {
            o.scatter(j, yy);
        }
    }
    Ok(Block {
        parts: vec![
            grid.analyze(&out[0], BasisKind::DirichletSine)?,
            grid.analyze(&out[1], BasisKind::NeumannCosine)?,
            grid.analyze(&out[2], BasisKind::DirichletSine)?,
        ],
    })
}

fn with_damped_heat<T: Real>(mut n: Block<T>, state: &Block<T>) -> Result<Block<T>> {
    for (p, x) in n.parts.iter_mut().zip(&state.parts) {
        add_damped_heat(p, x)?;
    }
    Ok(n)
}

/// Right-hand side of the x-differentiated system (requires `f(0, ·) ≡ 0`).
pub fn rred_rhs<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    state: &Block<T>,
) -> Result<Block<T>> {
    with_damped_heat(rred_nonlinear(grid, nl, state)?, state)
}

/// Nonlinear part of the Neumann system `(u, w = ∂ₓu)`: Neumann `u`, Dirichlet `w`.
pub fn fnd_nonlinear<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    state: &Block<T>,
) -> Result<Block<T>> {
    let m = nl.m();
    check_parts(state, &[BasisKind::NeumannCosine, BasisKind::DirichletSine], m)?;
    let (u, w) = (&state.parts[0], &state.parts[1]);
    let s = [grid.synthesize(u)?, grid.synthesize(w)?, grid.synthesize(&w.derivative())?];
    let nodes = s[0].nodes;
    let mut out = [Samples::zeros(m, nodes), Samples::zeros(m, nodes)];
    let mut b = vec![vec![T::zero(); m]; 3];
    let mut pw = Pointwise::new(m);
    let mut y = vec![vec![T::zero(); m]; 2];
    for j in 0..nodes {
        gather_all(&s, j, &mut b);
        pw.load(nl, &b[0], &b[1], false);
        for i in 0..m {
            y[0][i] = -pw.f[i];
            y[1][i] = -pw.lin(&pw.fu, i, &b[1]) - pw.lin(&pw.fp, i, &b[2]);
        }
        out[0].scatter(j, &y[0]);
        out[1].scatter(j, &y[1]);
    }
    Ok(Block {
        parts: vec![grid.analyze(&out[0], BasisKind::NeumannCosine)?, grid.analyze(&out[1], BasisKind::DirichletSine)?],
    })
}

pub fn fnd_rhs<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    state: &Block<T>,
) -> Result<Block<T>> {
    with_damped_heat(fnd_nonlinear(grid, nl, state)?, state)
}

/// Nonlinear part of the time-differentiated nonlocal system, state
/// `(u, w = ∂ₜu, θ_t = ∂ₜw)`, all Dirichlet, with `∂ₓu → 𝕋₁(u, w)` and
/// `∂ₓw → 𝕋₂(u, w, θ_t)`.
pub fn general_nonlinear<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    state: &Block<T>,
    cfg: &EllipticConfig,
) -> Result<Block<T>> {
    let m = nl.m();
    let d = BasisKind::DirichletSine;
    check_parts(state, &[d, d, d], m)?;
    let [u, w, th] = [&state.parts[0], &state.parts[1], &state.parts[2]];
    let (t1v, ups) = t1(grid, nl, u, w, cfg)?;
    let t2v = t2(grid, nl, &ups, w, th, cfg)?;
    let s = [
        grid.synthesize(u)?,
        grid.synthesize(&t1v)?,
        grid.synthesize(w)?,
        grid.synthesize(&t2v)?,
        grid.synthesize(th)?,
        grid.synthesize(&th.derivative())?,
    ];
    let nodes = s[0].nodes;
    let mut out = [Samples::zeros(m, nodes), Samples::zeros(m, nodes), Samples::zeros(m, nodes)];
    let mut b = vec![vec![T::zero(); m]; 6];
    let mut pw = Pointwise::new(m);
    let two = T::lit(2.0);
    let mut y = vec![vec![T::zero(); m]; 3];
    for j in 0..nodes {
        gather_all(&s, j, &mut b);
        pw.load(nl, &b[0], &b[1], true);
        let (wj, t2j, tj, txj) = (&b[2], &b[3], &b[4], &b[5]);
        for i in 0..m {
            y[0][i] = -pw.f[i];
            y[1][i] = -pw.lin(&pw.fu, i, wj) - pw.lin(&pw.fp, i, t2j);
            y[2][i] = -pw.quad(&pw.fuu, i, wj, wj)
                - two * pw.quad(&pw.fup, i, wj, t2j)
                - pw.quad(&pw.fpp, i, t2j, t2j)
                - pw.lin(&pw.fu, i, tj)
                - pw.lin(&pw.fp, i, txj);
        }
        for (o, yy) in out.iter_mut().zip(&y) {
            o.scatter(j, yy);
        }
    }
    Ok(Block { parts: out.iter().map(|o| grid.analyze(o, d)).collect::<Result<_>>()? })
}

pub fn general_system_rhs<T: Real, G: GradientNonlinearity<T> + ?Sized>(
    grid: &Grid<T>,
    nl: &G,
    state: &Block<T>,
    cfg: &EllipticConfig,
) -> Result<Block<T>> {
    with_damped_heat(general_nonlinear(grid, nl, state, cfg)?, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::gradient_presets;
    use crate::sampling::Spectrum;

    fn setup() -> (std::sync::Arc<Grid<f64>>, SpectralField<f64>) {
        let pi = std::f64::consts::PI;
        let grid = Grid::new(32, pi).unwrap();
        let mut rng = sampling::rng(4);
        let h = sampling::random_field(
            &mut rng,
            BasisKind::DirichletSine,
            pi,
            1,
            32,
            Spectrum::Smooth { decay: 1.5, max_mode: 16 },
            2.0,
        );
        (grid, h)
    }

    #[test]
    fn zero_nonlinearity_is_diagonal() {
        let (grid, h) = setup();
        let nl = gradient_presets::zero::<f64>(1);
        let cfg = EllipticConfig { n_shift: 3.0, tol: 1e-12, max_newton: 5, max_inner: 50 };
        let sol = upsilon_solve(&grid, &nl, &h, &cfg).unwrap();
        assert_eq!(sol.newton_iterations, 0);
        for i in 0..h.count() {
            let expect = -h.coeffs()[i] / (h.eigen(i) + 4.0);
            assert!((sol.u.coeffs()[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn newton_reaches_tolerance() {
        let (grid, h) = setup();
        let nl = gradient_presets::general::<f64>(1);
        let cfg = EllipticConfig::for_nonlinearity(&nl, 1);
        let sol = upsilon_solve(&grid, &nl, &h, &cfg).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.newton_iterations <= 20);
    }

    #[test]
    fn t2_is_linear_in_theta() {
        let (grid, h) = setup();
        let nl = gradient_presets::general::<f64>(1);
        let cfg = EllipticConfig::for_nonlinearity(&nl, 1);
        let u = upsilon_solve(&grid, &nl, &h, &cfg).unwrap().u;
        let w = h.scale(0.3);
        let th = h.second_derivative().scale(0.01);
        let (_, ups) = t1(&grid, &nl, &u, &w, &cfg).unwrap();
        let a = t2(&grid, &nl, &ups, &w, &th, &cfg).unwrap();
        // affine in θ through the −Nw term; compare the θ-linear parts
        let b = t2(&grid, &nl, &ups, &w, &th.scale(2.5), &cfg).unwrap();
        let c = t2(&grid, &nl, &ups, &w, &th.scale(0.0), &cfg).unwrap();
        let lhs = b.sub(&c).unwrap();
        let rhs = a.sub(&c).unwrap().scale(2.5);
        assert!(lhs.sub(&rhs).unwrap().l2_norm() <= 1e-10 * (1.0 + rhs.l2_norm()));
    }

    #[test]
    fn rred_rejects_general_f() {
        let (grid, h) = setup();
        let nl = gradient_presets::general::<f64>(1);
        let z = SpectralField::zeros(BasisKind::NeumannCosine, h.length(), 1, 32);
        let st = Block { parts: vec![h.clone(), z, h.clone()] };
        assert!(matches!(rred_rhs(&grid, &nl, &st), Err(Error::Precondition(_))));
    }
}
