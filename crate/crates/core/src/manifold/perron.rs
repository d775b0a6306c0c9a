//! Lyapunov–Perron fixed point for the backward boundary-value problem
//!
//! ```text
//! ∂ₜv + A v = 𝓕(v),  t ≤ 0,   P_n v(0) = v₀,
//! ```
//!
//! solved as `z = 𝓡(𝓕(w + z))` with `w(t) = e^{−At}v₀` on the low modes and
//! `v = w + z`, in the `θ`-weighted space over the truncated horizon `[−T, 0]`.

use serde::{Deserialize, Serialize};

use super::resolvent::{trapezoid_weights, ModeStep};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::Block;

/// Nonlinear forcing of a system `∂ₜv + (A + shift)v = 𝓕(v)` on a [`Block`] phase space.
pub trait Forcing<T: Real>: Send + Sync {
    /// Per-node cache reused between Perron iterations (e.g. a warm start).
    type Warm: Clone + Send;

    /// Zero element fixing the phase-space layout.
    fn template(&self) -> Block<T>;

    /// Shift added to the Laplacian eigenvalues of part `p`.
    fn shift(&self, _part: usize) -> T {
        T::zero()
    }

    /// `𝓕` vanishes for `‖v‖_{H¹} ≥` this radius, when known.
    fn support_radius(&self) -> Option<T> {
        None
    }

    fn eval(&self, v: &Block<T>, warm: Option<&Self::Warm>) -> Result<(Block<T>, Option<Self::Warm>)>;
}

/// Flattened coordinates of a [`Block`] with per-slot linear rates `μ` and `H¹` weights.
#[derive(Debug, Clone)]
pub struct Layout<T: Real> {
    template: Block<T>,
    pub mu: Vec<T>,
    pub h1_weight: Vec<T>,
}

impl<T: Real> Layout<T> {
    pub fn new<F: Forcing<T> + ?Sized>(forcing: &F) -> Self {
        let template = forcing.template();
        let mut mu = Vec::new();
        let mut h1_weight = Vec::new();
        for (p, part) in template.parts.iter().enumerate() {
            let shift = forcing.shift(p);
            for _ in 0..part.m() {
                for i in 0..part.count() {
                    mu.push(part.eigen(i) + shift);
                    h1_weight.push(T::one() + part.eigen(i));
                }
            }
        }
        Layout { template, mu, h1_weight }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn template(&self) -> &Block<T> {
        &self.template
    }

    pub fn flatten(&self, b: &Block<T>) -> Vec<T> {
        b.parts.iter().flat_map(|p| p.coeffs().iter().copied()).collect()
    }

    pub fn unflatten(&self, x: &[T]) -> Block<T> {
        let mut out = self.template.clone();
        let mut at = 0;
        for part in out.parts.iter_mut() {
            let c = part.coeffs_mut();
            let n = c.len();
            c.copy_from_slice(&x[at..at + n]);
            at += n;
        }
        out
    }

    pub fn h1_sq(&self, x: &[T]) -> T {
        x.iter().zip(&self.h1_weight).map(|(&a, &w)| a * a * w).sum()
    }

    /// Slots with `μ < θ`.
    pub fn low_mask(&self, theta: T) -> Vec<bool> {
        self.mu.iter().map(|&m| m < theta).collect()
    }

    /// `P` (low) or `Q` (high) part of a block relative to `θ`.
    pub fn split(&self, b: &Block<T>, theta: T, low: bool) -> Block<T> {
        let mut x = self.flatten(b);
        for (v, &mu) in x.iter_mut().zip(&self.mu) {
            if (mu < theta) != low {
                *v = T::zero();
            }
        }
        self.unflatten(&x)
    }

    /// Low-mode coordinates as a plain vector.
    pub fn low_coords(&self, b: &Block<T>, theta: T) -> Vec<T> {
        self.flatten(b).into_iter().zip(&self.mu).filter(|(_, &m)| m < theta).map(|(v, _)| v).collect()
    }

    pub fn from_low_coords(&self, c: &[T], theta: T) -> Block<T> {
        let mut x = vec![T::zero(); self.len()];
        let mut it = c.iter();
        for (v, &m) in x.iter_mut().zip(&self.mu) {
            if m < theta {
                *v = *it.next().expect("coordinate count");
            }
        }
        self.unflatten(&x)
    }
}

/// Discretization of the Perron problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerronConfig {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// `θ = (μ_n + μ_{n+1})/2`.
    pub theta: f64,
    /// `μ_{n+1} − θ`, half the gap.
    pub half_gap: f64,
    pub horizon: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl PerronConfig {
    /// Defaults for low-mode eigenvalues `μ_n < μ_{n+1}`: `θ` midway,
    /// `T` from `e^{−(μ_{n+1}−θ)T} ≤ tol`, `dt = min(1e-3, 0.1/μ_{n+1})`.
    pub fn new(n: usize, k: usize, mu_n: f64, mu_n1: f64) -> Result<Self> {
        if !(mu_n < mu_n1) {
            return Err(Error::Configuration(format!("need μ_n < μ_(n+1), got {mu_n} and {mu_n1}")));
        }
        let tol: f64 = 1e-9;
        let theta = 0.5 * (mu_n + mu_n1);
        let half_gap = mu_n1 - theta;
        let horizon = (1.0 / tol).ln() / half_gap;
        let dt = (0.1 / mu_n1).min(1e-3);
        Ok(PerronConfig { n, k, theta, half_gap, horizon, dt, tol, max_iter: 200 })
    }

    /// Dirichlet Laplacian on `(0, L)`: `μ_k = (πk/L)² + shift`.
    pub fn dirichlet(n: usize, k: usize, length: f64, shift: f64) -> Result<Self> {
        let l = |j: usize| (std::f64::consts::PI * j as f64 / length).powi(2) + shift;
        Self::new(n, k, l(n), l(n + 1))
    }

    pub fn nodes(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize + 1
    }

    /// Node times `t_j = −T + j·dt`, `t_J = 0` (the horizon is rounded up to whole steps).
    pub fn times(&self) -> Vec<f64> {
        let n = self.nodes();
        (0..n).map(|j| -(self.dt * (n - 1 - j) as f64)).collect()
    }
}

/// Fixed point of the Perron operator.
#[derive(Debug, Clone)]
pub struct PerronSolution<T: Real> {
    pub times: Vec<f64>,
    /// Scaled trajectory `e^{θt} v(t)` per node, flattened.
    pub scaled: Vec<Vec<T>>,
    /// `v(0)`.
    pub v0: Block<T>,
    /// `M(v₀) = Q_n v(0)`.
    pub image: Block<T>,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub factors: Vec<f64>,
}

impl<T: Real> PerronSolution<T> {
    pub fn max_factor(&self) -> f64 {
        self.factors.iter().copied().fold(0.0, f64::max)
    }
}

/// Increments below this multiple of the tolerance are treated as round-off
/// when checking the contraction.
const FACTOR_FLOOR: f64 = 100.0;

/// Solves the Perron problem for the low-mode datum `v0` (its high modes are ignored).
pub fn perron_solve<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    v0: &Block<T>,
    cfg: &PerronConfig,
) -> Result<PerronSolution<T>> {
    perron_solve_with(forcing, &Layout::new(forcing), v0, cfg)
}

pub fn perron_solve_with<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    layout: &Layout<T>,
    v0: &Block<T>,
    cfg: &PerronConfig,
) -> Result<PerronSolution<T>> {
    let theta = T::lit(cfg.theta);
    let dt = T::lit(cfg.dt);
    let times = cfg.times();
    let nt = times.len();
    let s = layout.len();
    let low = layout.low_mask(theta);
    let steps: Vec<ModeStep<T>> =
        layout.mu.iter().map(|&mu| ModeStep::new(mu - theta, dt)).collect::<Result<_>>()?;
    let x0 = layout.flatten(v0);
    // ŵ(t) = e^{(θ−μ)t} v₀ on low modes
    let w: Vec<Vec<T>> = times
        .iter()
        .map(|&t| {
            (0..s)
                .map(|i| if low[i] { ((theta - layout.mu[i]) * T::lit(t)).exp() * x0[i] } else { T::zero() })
                .collect()
        })
        .collect();
    let weights = trapezoid_weights(nt, dt);
    let log_radius = forcing.support_radius().map(|r| r.ln());
    let mut z: Vec<Vec<T>> = vec![vec![T::zero(); s]; nt];
    let mut warm: Vec<Option<F::Warm>> = vec![None; nt];
    let mut h: Vec<Vec<T>> = vec![vec![T::zero(); s]; nt];
    let mut increments = Vec::new();
    let mut factors = Vec::new();
    let mut col_h = vec![T::zero(); nt];
    let mut col_y = vec![T::zero(); nt];
    for iter in 1..=cfg.max_iter {
        for j in 0..nt {
            let t = T::lit(times[j]);
            let vh: Vec<T> = w[j].iter().zip(&z[j]).map(|(&a, &b)| a + b).collect();
            let nh = layout.h1_sq(&vh).sqrt();
            // ‖v(t)‖ = e^{−θt}‖v̂(t)‖; compare in logs to stay finite.
            let outside = match log_radius {
                Some(lr) => nh > T::zero() && nh.ln() - theta * t >= lr,
                None => false,
            };
            if outside {
                h[j].iter_mut().for_each(|x| *x = T::zero());
                warm[j] = None;
                continue;
            }
            let scale = (-theta * t).exp();
            let v: Vec<T> = vh.iter().map(|&x| x * scale).collect();
            let (f, wm) = forcing.eval(&layout.unflatten(&v), warm[j].as_ref())?;
            warm[j] = wm;
            let back = (theta * t).exp();
            for (dst, src) in h[j].iter_mut().zip(layout.flatten(&f)) {
                *dst = src * back;
            }
        }
        let mut z_new = vec![vec![T::zero(); s]; nt];
        for i in 0..s {
            for j in 0..nt {
                col_h[j] = h[j][i];
            }
            steps[i].apply(&col_h, &mut col_y);
            for j in 0..nt {
                z_new[j][i] = col_y[j];
            }
        }
        let mut inc = T::zero();
        for j in 0..nt {
            let d: Vec<T> = z_new[j].iter().zip(&z[j]).map(|(&a, &b)| a - b).collect();
            inc += weights[j] * layout.h1_sq(&d);
        }
        let inc = inc.sqrt().f64();
        if !inc.is_finite() {
            return Err(Error::IntegrationBlowup { time: 0.0 });
        }
        if let Some(&prev) = increments.last() {
            if prev > FACTOR_FLOOR * cfg.tol {
                let factor = inc / prev;
                factors.push(factor);
                if factor >= 1.0 {
                    return Err(Error::ContractionViolation { factor, iteration: iter });
                }
            }
        }
        increments.push(inc);
        z = z_new;
        if inc <= cfg.tol {
            let last = nt - 1;
            let v_end: Vec<T> = w[last].iter().zip(&z[last]).map(|(&a, &b)| a + b).collect();
            let v0b = layout.unflatten(&v_end);
            let image = layout.split(&v0b, theta, false);
            let scaled = (0..nt)
                .map(|j| w[j].iter().zip(&z[j]).map(|(&a, &b)| a + b).collect())
                .collect();
            return Ok(PerronSolution {
                times,
                scaled,
                v0: v0b,
                image,
                iterations: iter,
                increments,
                factors,
            });
        }
    }
    Err(Error::Solver(format!("Perron iteration did not reach {:e} in {} iterations", cfg.tol, cfg.max_iter)))
}

/// `M(v₀) = Q_n v(0)`.
pub fn manifold_graph_eval<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    v0: &Block<T>,
    cfg: &PerronConfig,
) -> Result<Block<T>> {
    Ok(perron_solve(forcing, v0, cfg)?.image)
}
