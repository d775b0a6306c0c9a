//! End-to-end construction for a Dirichlet RDA system: absorbing radius,
//! cut-off, measured Lipschitz constants, `(K, n)`, the tabulated graph and
//! its invariance and tracking checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    build_manifold, choose_parameters, invariance_residual, tracking_perron, InvarianceReport, Layout, ManifoldGraph,
    ParameterChoice, PerronConfig, TrackingFit,
};
use crate::diffeo::Diffeo;
use crate::dynamics::{self, absorbing_radius, entry_time};
use crate::error::Result;
use crate::nonlinearity::Nonlinearity;
use crate::sampling::{self, Spectrum};
use crate::spectral::{BasisKind, Block, Grid, SpectralField};
use crate::transformed::{lipschitz_report, sample_pairs, CutoffSpec, LipschitzReport, Transformed};

/// Knobs of [`dirichlet_pipeline`] (and of the Neumann counterpart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub seed: u64,
    pub dt: f64,
    /// Trajectories used to measure the absorbing ball, their length and initial `H¹` norm.
    pub absorb_runs: usize,
    pub absorb_time: f64,
    pub absorb_norm: f64,
    /// Starting `K` of the doubling search.
    pub k_start: usize,
    /// Fixes `(K, n)` instead of searching when both are given.
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub lipschitz_pairs: usize,
    pub base_points: usize,
    pub tracking_runs: usize,
    pub tracking_time: f64,
    /// Spacing of the states at which `M` is evaluated during tracking.
    pub tracking_every: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            seed: 1,
            dt: 1e-3,
            absorb_runs: 3,
            absorb_time: 20.0,
            absorb_norm: 10.0,
            k_start: 8,
            k: None,
            n: None,
            lipschitz_pairs: 501,
            base_points: 16,
            tracking_runs: 5,
            tracking_time: 0.8,
            tracking_every: 0.05,
        }
    }
}

/// Everything [`dirichlet_pipeline`] measured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub absorbing_radius: f64,
    /// Largest `‖V(u)‖_{H¹}` over the absorbed trajectory samples.
    pub image_radius: f64,
    pub r1: f64,
    pub r: f64,
    pub lipschitz: Vec<LipschitzReport>,
    pub choice: ParameterChoice,
    pub graph_loo_error: f64,
    pub graph_lipschitz: f64,
    pub invariance: InvarianceReport,
    pub tracking: Vec<TrackingFit>,
}

pub(crate) fn stride_for(every: f64, dt: f64) -> usize {
    ((every / dt).round() as usize).max(1)
}

/// Random low-coordinate base points in the ball of radius `radius`, plus the origin.
pub(crate) fn random_base_points<T: crate::Real>(
    layout: &Layout<T>,
    theta: T,
    radius: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<T>> {
    use rand::Rng;
    let mut rng = sampling::rng(seed);
    let low = layout.low_mask(theta);
    let w: Vec<f64> = layout.h1_weight.iter().zip(&low).filter(|(_, &l)| l).map(|(w, _)| w.f64()).collect();
    let mut pts = vec![vec![T::zero(); w.len()]];
    while pts.len() < count.max(1) {
        let raw: Vec<f64> = w.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = raw.iter().zip(&w).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let s = radius * rng.gen_range(0.1..1.0) / norm;
        pts.push(raw.iter().map(|x| T::lit(x * s)).collect());
    }
    pts
}

/// Runs the Dirichlet construction for `nl` on `grid`.
pub fn dirichlet_pipeline<N: Nonlinearity<f64> + Clone>(
    nl: &N,
    grid: &Arc<Grid<f64>>,
    opts: &PipelineOptions,
) -> Result<(ManifoldGraph<f64>, PipelineReport)> {
    let (length, n_modes, m) = (grid.length(), grid.n_modes(), nl.m());
    let mut rng = sampling::rng(opts.seed);
    let smooth = Spectrum::Smooth { decay: 2.0, max_mode: 16.min(n_modes) };
    let trajs: Vec<_> = (0..opts.absorb_runs)
        .map(|_| {
            let u0 = sampling::random_field(&mut rng, BasisKind::DirichletSine, length, m, n_modes, smooth, opts.absorb_norm);
            dynamics::evolve_with(
                &u0,
                opts.absorb_time,
                opts.dt,
                nl,
                grid,
                dynamics::EvolveOptions { stride: stride_for(0.1, opts.dt), lipschitz_bound: None },
            )
        })
        .collect::<Result<_>>()?;
    let absorbing = absorbing_radius(&trajs, 0.5 * opts.absorb_time, opts.absorb_time);
    let probe = Diffeo::new(nl.clone(), grid.clone(), opts.k.unwrap_or(opts.k_start).min(n_modes))?;
    let mut image_radius: f64 = 0.0;
    for tr in &trajs {
        let entry = entry_time(tr, absorbing).unwrap_or(opts.absorb_time);
        for (t, u) in tr.times.iter().zip(&tr.states) {
            if *t >= entry {
                image_radius = image_radius.max(probe.inverse_map(u)?.h1_norm());
            }
        }
    }
    let cutoff = CutoffSpec::from_measured(image_radius.max(1e-3));
    let template = SpectralField::zeros(BasisKind::DirichletSine, length, m, n_modes);
    let pairs = sample_pairs(opts.seed ^ 0x5eed, &template, cutoff.r, opts.lipschitz_pairs);
    let mut lipschitz = Vec::new();
    let mut measure = |k: usize| -> Result<(f64, f64)> {
        let tr = Transformed::new(Diffeo::new(nl.clone(), grid.clone(), k)?, cutoff);
        let rep = lipschitz_report(&tr, &pairs)?;
        let out = (rep.l1, rep.l2);
        lipschitz.push(rep);
        Ok(out)
    };
    let choice = match (opts.k, opts.n) {
        (Some(k), Some(n)) => {
            let (l1, l2) = measure(k)?;
            let report = super::spectral_gap_check(n, length, k, super::SAFETY_FACTOR * l1, super::SAFETY_FACTOR * l2);
            ParameterChoice { k, n, report, config: PerronConfig::dirichlet(n, k, length, 0.0)?, measured: vec![(k, l1, l2)] }
        }
        _ => choose_parameters(length, n_modes, opts.k.unwrap_or(opts.k_start), &mut measure)?,
    };
    let tr = Transformed::new(Diffeo::new(nl.clone(), grid.clone(), choice.k)?, cutoff);
    let cfg = choice.config.clone();
    let layout = Layout::new(&tr);
    let base = random_base_points(&layout, cfg.theta, cutoff.r1, opts.base_points, opts.seed ^ 0xba5e);
    let graph = build_manifold(&tr, &base, &cfg)?;
    let invariance = invariance_residual(&tr, &graph, &cfg, opts.dt)?;
    let mut tracking = Vec::new();
    for _ in 0..opts.tracking_runs {
        let v0 = sampling::random_field(
            &mut rng,
            BasisKind::DirichletSine,
            length,
            m,
            n_modes,
            Spectrum::Smooth { decay: 1.0, max_mode: 32.min(n_modes) },
            0.9 * cutoff.r1,
        );
        let traj = tr.evolve(&v0, opts.tracking_time, opts.dt, stride_for(opts.tracking_every, opts.dt))?;
        let states: Vec<Block<f64>> = traj.states.into_iter().map(Block::single).collect();
        tracking.push(tracking_perron(&tr, &cfg, &traj.times, &states, opts.dt)?);
    }
    let report = PipelineReport {
        absorbing_radius: absorbing,
        image_radius,
        r1: cutoff.r1,
        r: cutoff.r,
        lipschitz,
        graph_loo_error: graph.loo_error()?,
        graph_lipschitz: graph.lipschitz_sampled(),
        choice,
        invariance,
        tracking,
    };
    Ok((graph, report))
}
