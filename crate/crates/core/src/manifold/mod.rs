//! Spectral-gap parameter selection, the Lyapunov–Perron construction of the
//! graph `M: P_nΦ → Q_nΦ`, and invariance / tracking verification.

mod graph;
mod perron;
mod pipeline;
pub mod resolvent;

use serde::{Deserialize, Serialize};

pub use graph::{
    build_manifold, exp_euler_block, invariance_residual, tracking_perron, tracking_verify, InvarianceReport, ManifoldGraph,
    TrackingFit,
};
pub use pipeline::{dirichlet_pipeline, PipelineOptions, PipelineReport};
pub(crate) use pipeline::{random_base_points, stride_for};
pub use perron::{
    manifold_graph_eval, perron_solve, perron_solve_with, Forcing, Layout, PerronConfig, PerronSolution,
};

use crate::error::{Error, Result};
use crate::matrix::MatrixField;
use crate::nonlinearity::Nonlinearity;
use crate::scalar::Real;
use crate::spectral::{eigenvalue_unchecked, BasisKind, Block, SpectralField};
use crate::transformed::Transformed;

/// Gap diagnostics for one `(K, n)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub lambda_n: f64,
    pub lambda_n1: f64,
    pub gap: f64,
    /// `(λ_{n+1} − λ_n)/λ_{n+1}^{1/2}` against `4L₁`.
    pub cond1_lhs: f64,
    pub cond1_rhs: f64,
    pub cond1: bool,
    /// `λ_{n+1} − λ_n` against `4L₂`.
    pub cond2_lhs: f64,
    pub cond2_rhs: f64,
    pub cond2: bool,
    /// `2λ_{n+1}^{1/2}L₁/(λ_{n+1}−λ_n) + 2L₂/(λ_{n+1}−λ_n)`.
    pub budget: f64,
    pub pass: bool,
}

/// Evaluates both gap conditions and the Perron contraction budget for the
/// Dirichlet spectrum on `(0, L)`. `l1`, `l2` are used as given (callers
/// apply any safety factor).
pub fn spectral_gap_check(n: usize, length: f64, k: usize, l1: f64, l2: f64) -> GapReport {
    spectral_gap_check_shifted(n, length, k, l1, l2, 0.0)
}

/// [`spectral_gap_check`] for the operator `−∂²ₓ + shift`.
pub fn spectral_gap_check_shifted(n: usize, length: f64, k: usize, l1: f64, l2: f64, shift: f64) -> GapReport {
    let lambda_n = eigenvalue_unchecked::<f64>(n, length) + shift;
    let lambda_n1 = eigenvalue_unchecked::<f64>(n + 1, length) + shift;
    let gap = crate::spectral::gap_difference::<f64>(n, length);
    let cond1_lhs = gap / lambda_n1.sqrt();
    let cond1_rhs = 4.0 * l1;
    let cond2_lhs = gap;
    let cond2_rhs = 4.0 * l2;
    let budget = 2.0 * lambda_n1.sqrt() * l1 / gap + 2.0 * l2 / gap;
    let cond1 = cond1_lhs > cond1_rhs;
    let cond2 = cond2_lhs > cond2_rhs;
    GapReport {
        n,
        k,
        l1,
        l2,
        lambda_n,
        lambda_n1,
        gap,
        cond1_lhs,
        cond1_rhs,
        cond1,
        cond2_lhs,
        cond2_rhs,
        cond2,
        budget,
        pass: cond1 && cond2,
    }
}

/// Safety factor applied to measured Lipschitz constants before the gap check.
pub const SAFETY_FACTOR: f64 = 2.0;
/// Largest accepted contraction budget.
pub const MAX_BUDGET: f64 = 0.5;

/// Outcome of [`choose_parameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterChoice {
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub report: GapReport,
    pub config: PerronConfig,
    /// Measured `(K, L₁, L₂)` for every `K` tried.
    pub measured: Vec<(usize, f64, f64)>,
}

/// Doubles `K` (from `k_start`, up to 512 and the resolution) until
/// `4·s·L₁(K) < π/(2L)`, then scans `n` upward (up to `N_total/4`) until both
/// gap conditions hold with budget `≤ 0.5`, `s` being [`SAFETY_FACTOR`].
/// `measure(K)` returns the measured `(L₁, L₂)`.
pub fn choose_parameters<M>(length: f64, n_total: usize, k_start: usize, measure: M) -> Result<ParameterChoice>
where
    M: FnMut(usize) -> Result<(f64, f64)>,
{
    choose_parameters_shifted(length, n_total, k_start, 0.0, measure)
}

/// [`choose_parameters`] for the operator `−∂²ₓ + shift`.
pub fn choose_parameters_shifted<M>(
    length: f64,
    n_total: usize,
    k_start: usize,
    shift: f64,
    mut measure: M,
) -> Result<ParameterChoice>
where
    M: FnMut(usize) -> Result<(f64, f64)>,
{
    let floor = std::f64::consts::PI / (2.0 * length);
    let mut measured = Vec::new();
    let mut k = k_start.max(1);
    while k <= 512 && k <= n_total {
        let (l1, l2) = measure(k)?;
        measured.push((k, l1, l2));
        if 4.0 * SAFETY_FACTOR * l1 < floor {
            for n in 1..=(n_total / 4).max(1) {
                let rep = spectral_gap_check_shifted(n, length, k, SAFETY_FACTOR * l1, SAFETY_FACTOR * l2, shift);
                if rep.pass && rep.budget <= MAX_BUDGET {
                    let config = PerronConfig::dirichlet(n, k, length, shift)?;
                    return Ok(ParameterChoice { k, n, report: rep, config, measured });
                }
            }
            return Err(Error::Infeasible(format!(
                "K = {k}: no n ≤ {} satisfies the gap conditions (L₂ = {l2:.3e})",
                n_total / 4
            )));
        }
        k *= 2;
    }
    Err(Error::Infeasible(format!("no K ≤ {} makes L₁ small enough", n_total.min(512))))
}

impl<T: Real, N: Nonlinearity<T>> Forcing<T> for Transformed<T, N> {
    type Warm = MatrixField<T>;

    fn template(&self) -> Block<T> {
        let g = self.grid();
        Block::single(SpectralField::zeros(
            BasisKind::DirichletSine,
            g.length(),
            self.diffeo().nonlinearity().m(),
            g.n_modes(),
        ))
    }

    fn support_radius(&self) -> Option<T> {
        Some(self.cutoff().r)
    }

    fn eval(&self, v: &Block<T>, warm: Option<&MatrixField<T>>) -> Result<(Block<T>, Option<MatrixField<T>>)> {
        let (n, a) = self.nonlinear(&v.parts[0], warm)?;
        Ok((Block::single(n), a))
    }
}

/// Linear forcing `𝓕(v) = B v` on the flattened coordinates.
#[derive(Debug, Clone)]
pub struct LinearForcing<T: Real> {
    pub template: Block<T>,
    /// Row-major `S × S`, `S` the number of coordinates.
    pub matrix: Vec<T>,
    pub shifts: Vec<T>,
}

impl<T: Real> Forcing<T> for LinearForcing<T> {
    type Warm = ();

    fn template(&self) -> Block<T> {
        self.template.clone()
    }

    fn shift(&self, part: usize) -> T {
        self.shifts.get(part).copied().unwrap_or(T::zero())
    }

    fn eval(&self, v: &Block<T>, _: Option<&()>) -> Result<(Block<T>, Option<()>)> {
        let x: Vec<T> = v.parts.iter().flat_map(|p| p.coeffs().iter().copied()).collect();
        let s = x.len();
        if self.matrix.len() != s * s {
            return Err(Error::SizeMismatch { expected: self.matrix.len(), got: s * s });
        }
        let mut y = vec![T::zero(); s];
        crate::matrix::matvec(&self.matrix, &x, &mut y, s);
        let mut out = self.template.clone();
        let mut at = 0;
        for part in out.parts.iter_mut() {
            let c = part.coeffs_mut();
            let n = c.len();
            c.copy_from_slice(&y[at..at + n]);
            at += n;
        }
        Ok((out, None))
    }
}

/// Estimated norms of the discrete resolvent against the analytic bounds
/// `2/(λ_{n+1}−λ_n)` (Φ → Φ) and `2λ_{n+1}^{1/2}/(λ_{n+1}−λ_n)` (L² → Φ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventNorms {
    pub n: usize,
    pub theta: f64,
    pub phi_to_phi: f64,
    pub phi_bound: f64,
    pub l2_to_phi: f64,
    pub l2_bound: f64,
}

/// Power-iteration estimate over the first `modes` Dirichlet modes.
pub fn resolvent_norms(cfg: &PerronConfig, length: f64, modes: usize, iterations: usize) -> Result<ResolventNorms> {
    let nodes = cfg.nodes();
    let mut phi: f64 = 0.0;
    let mut l2: f64 = 0.0;
    for k in 1..=modes {
        let lam = eigenvalue_unchecked::<f64>(k, length);
        let step = resolvent::ModeStep::new(lam - cfg.theta, cfg.dt)?;
        let r = resolvent::mode_operator_norm(&step, nodes, cfg.dt, iterations);
        phi = phi.max(r);
        l2 = l2.max(r * (1.0 + lam).sqrt());
    }
    let n = cfg.n;
    let gap = crate::spectral::gap_difference::<f64>(n, length);
    let lam1 = eigenvalue_unchecked::<f64>(n + 1, length);
    Ok(ResolventNorms {
        n,
        theta: cfg.theta,
        phi_to_phi: phi,
        phi_bound: 2.0 / gap,
        l2_to_phi: l2,
        l2_bound: 2.0 * lam1.sqrt() / gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_check_reference_case() {
        let r = spectral_gap_check(5, std::f64::consts::PI, 8, 0.1, 1.0);
        assert!((r.gap - 11.0).abs() < 1e-12);
        assert!((r.cond1_lhs - 11.0 / 6.0).abs() < 1e-12);
        assert!(r.cond1 && r.cond2 && r.pass);
        assert!((r.budget - (1.2 / 11.0 + 2.0 / 11.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_lipschitz_passes_everywhere() {
        for n in 1..20 {
            let r = spectral_gap_check(n, 2.0, 4, 0.0, 0.0);
            assert!(r.pass);
            assert_eq!(r.budget, 0.0);
        }
    }

    #[test]
    fn zero_nonlinearity_picks_smallest_parameters() {
        let c = choose_parameters(std::f64::consts::PI, 64, 4, |_| Ok((0.0, 0.0))).unwrap();
        assert_eq!((c.k, c.n), (4, 1));
    }

    #[test]
    fn huge_l2_is_infeasible() {
        let r = choose_parameters(std::f64::consts::PI, 64, 4, |_| Ok((0.0, 1e6)));
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn config_invariants() {
        let c = PerronConfig::dirichlet(3, 8, std::f64::consts::PI, 0.0).unwrap();
        assert!(c.theta > 9.0 && c.theta < 16.0);
        assert!((-(16.0 - c.theta) * c.horizon).exp() <= c.tol * 1.0000001);
        let t = c.times();
        assert_eq!(*t.last().unwrap(), 0.0);
        assert!(t[0] <= -c.horizon);
    }
}
