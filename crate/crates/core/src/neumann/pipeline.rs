//! Manifold construction for the Neumann problem through the mixed `(u, w)`
//! system and the partial transform `w = a(u)v`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{constraint_drift, embed, BlockTrajectory, DriftReport, ExtendedSystem, NeumannTransformed, Part};
use crate::dynamics::absorbing_radius_by;
use crate::error::Result;
use crate::manifold::{
    build_manifold, choose_parameters_shifted, invariance_residual, random_base_points, stride_for, tracking_perron,
    InvarianceReport, Layout, ManifoldGraph, ParameterChoice, PerronConfig, PipelineOptions, TrackingFit,
};
use crate::nonlinearity::Nonlinearity;
use crate::sampling::{self, Spectrum};
use crate::spectral::{BasisKind, Block, Grid, SpectralField};
use crate::transformed::{sample_pairs, CutoffSpec, Norm};

/// Lipschitz quotients of `E(u) = (u, ∂ₓu)` from `H²` to `H¹ × H¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingAudit {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// `(‖u‖²_{L²} + ‖∂²ₓu‖²_{L²})^{1/2}`.
fn h2_norm(u: &SpectralField<f64>) -> f64 {
    (u.l2_norm().powi(2) + u.h2_seminorm().powi(2)).sqrt()
}

/// Audits `E` on all pairs of the given Neumann samples.
pub fn embedding_audit(samples: &[SpectralField<f64>]) -> Result<EmbeddingAudit> {
    let (mut lo, mut hi, mut count) = (f64::INFINITY, 0.0_f64, 0);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = samples[i].sub(&samples[j])?;
            let den = h2_norm(&d);
            if den < 1e-12 {
                continue;
            }
            let r = embed(&d)?.h1_norm() / den;
            lo = lo.min(r);
            hi = hi.max(r);
            count += 1;
        }
    }
    if count == 0 {
        lo = f64::NAN;
        hi = f64::NAN;
    }
    Ok(EmbeddingAudit { pairs: count, min_ratio: lo, max_ratio: hi })
}

/// Everything [`neumann_manifold_pipeline`] measured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannPipelineReport {
    pub absorbing_radius: f64,
    /// Largest `‖(u, a(u)⁻¹w)‖_{H¹}` over absorbed samples.
    pub image_radius: f64,
    pub r1: f64,
    pub r: f64,
    pub embedding: EmbeddingAudit,
    pub drift: Vec<DriftReport>,
    /// `(K, L₁, L₂)` for every `K` tried.
    pub lipschitz: Vec<(usize, f64, f64)>,
    pub choice: ParameterChoice,
    pub low_dimension: usize,
    pub graph_loo_error: f64,
    pub graph_lipschitz: f64,
    pub invariance: InvarianceReport,
    pub tracking: Vec<TrackingFit>,
}

/// Pairs of `(u, v)` states in the ball of radius `radius`.
fn block_pairs(seed: u64, template: &Block<f64>, radius: f64, count: usize) -> Vec<(Block<f64>, Block<f64>)> {
    let share = radius / (template.parts.len() as f64).sqrt();
    let per_part: Vec<_> = template
        .parts
        .iter()
        .enumerate()
        .map(|(p, t)| sample_pairs(seed.wrapping_add(p as u64), t, share, count))
        .collect();
    (0..count)
        .map(|i| {
            let a = Block { parts: per_part.iter().map(|pp| pp[i].0.clone()).collect() };
            let b = Block { parts: per_part.iter().map(|pp| pp[i].1.clone()).collect() };
            (a, b)
        })
        .collect()
}

fn block_norm(b: &Block<f64>, norm: Norm) -> f64 {
    b.parts.iter().map(|p| norm.of(p).powi(2)).sum::<f64>().sqrt()
}

/// Largest sampled `‖F(a) − F(b)‖ / ‖a − b‖_{H¹}`.
fn block_lipschitz<F>(f: F, pairs: &[(Block<f64>, Block<f64>)], norm: Norm) -> Result<f64>
where
    F: Fn(&Block<f64>) -> Result<Block<f64>>,
{
    let mut best = 0.0_f64;
    for (a, b) in pairs {
        let den = a.sub(b)?.h1_norm();
        if den < 1e-14 {
            continue;
        }
        best = best.max(block_norm(&f(a)?.sub(&f(b)?)?, norm) / den);
    }
    Ok(best)
}

/// Runs the Neumann construction for `nl` on `grid`. Constraint drift is
/// recorded on the absorbing runs over `[0, drift_time]`.
pub fn neumann_manifold_pipeline<N: Nonlinearity<f64> + Clone>(
    nl: &N,
    grid: &Arc<Grid<f64>>,
    opts: &PipelineOptions,
    drift_time: f64,
) -> Result<(ManifoldGraph<f64>, NeumannPipelineReport)> {
    let (length, n_modes, m) = (grid.length(), grid.n_modes(), nl.m());
    let mut rng = sampling::rng(opts.seed);
    let system = ExtendedSystem::new(nl.clone(), grid.clone());
    let smooth = Spectrum::Smooth { decay: 2.0, max_mode: 16.min(n_modes) };
    let run_time = opts.absorb_time.max(drift_time);
    let stride = stride_for(0.1, opts.dt);
    let trajs: Vec<BlockTrajectory<f64>> = (0..opts.absorb_runs)
        .map(|_| {
            let u0 = sampling::random_field(&mut rng, BasisKind::NeumannCosine, length, m, n_modes, smooth, opts.absorb_norm);
            system.evolve(&embed(&u0)?, run_time, opts.dt, stride)
        })
        .collect::<Result<_>>()?;
    let drift = trajs
        .iter()
        .map(|tr| {
            let keep = tr.times.iter().take_while(|&&t| t <= drift_time + 1e-9).count();
            constraint_drift(&BlockTrajectory {
                times: tr.times[..keep].to_vec(),
                states: tr.states[..keep].to_vec(),
                dt: tr.dt,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<(Vec<f64>, Vec<f64>)> =
        trajs.iter().map(|tr| (tr.times.clone(), tr.states.iter().map(|s| s.h1_norm()).collect())).collect();
    let absorbing = absorbing_radius_by(&norms, 0.5 * run_time, run_time);

    let mut samples = Vec::new();
    for tr in &trajs {
        for s in tr.states.iter().step_by(5) {
            samples.push(s.parts[0].clone());
        }
    }
    let embedding = embedding_audit(&samples)?;

    let probe = NeumannTransformed::new(nl.clone(), grid.clone(), opts.k.unwrap_or(opts.k_start).min(n_modes), CutoffSpec::from_measured(1.0))?;
    let mut image_radius: f64 = 0.0;
    for (tr, (_, ns)) in trajs.iter().zip(&norms) {
        for (s, n) in tr.states.iter().zip(ns) {
            if *n <= absorbing {
                image_radius = image_radius.max(probe.forward(s)?.h1_norm());
            }
        }
    }
    let cutoff = CutoffSpec::from_measured(image_radius.max(1e-3));

    let pairs = block_pairs(opts.seed ^ 0x5eed, &crate::manifold::Forcing::template(&probe), cutoff.r, opts.lipschitz_pairs);
    let mut lipschitz = Vec::new();
    let mut measure = |k: usize| -> Result<(f64, f64)> {
        let ntr = NeumannTransformed::new(nl.clone(), grid.clone(), k, cutoff)?;
        let l1 = block_lipschitz(|b| ntr.nonlinear(b, Part::Advection), &pairs, Norm::L2)?;
        let l2 = block_lipschitz(|b| ntr.nonlinear(b, Part::Rest), &pairs, Norm::H1)?;
        lipschitz.push((k, l1, l2));
        Ok((l1, l2))
    };
    let choice = match (opts.k, opts.n) {
        (Some(k), Some(n)) => {
            let (l1, l2) = measure(k)?;
            let s = crate::manifold::SAFETY_FACTOR;
            let report = crate::manifold::spectral_gap_check_shifted(n, length, k, s * l1, s * l2, 1.0);
            ParameterChoice { k, n, report, config: PerronConfig::dirichlet(n, k, length, 1.0)?, measured: vec![(k, l1, l2)] }
        }
        _ => choose_parameters_shifted(length, n_modes, opts.k.unwrap_or(opts.k_start), 1.0, &mut measure)?,
    };

    let ntr = NeumannTransformed::new(nl.clone(), grid.clone(), choice.k, cutoff)?;
    let cfg = choice.config.clone();
    let layout = Layout::new(&ntr);
    let low_dimension = layout.low_mask(cfg.theta).iter().filter(|&&l| l).count();
    let base = random_base_points(&layout, cfg.theta, cutoff.r1, opts.base_points, opts.seed ^ 0xba5e);
    let graph = build_manifold(&ntr, &base, &cfg)?;
    let invariance = invariance_residual(&ntr, &graph, &cfg, opts.dt)?;

    let mut tracking = Vec::new();
    let track_spec = Spectrum::Smooth { decay: 1.0, max_mode: 32.min(n_modes) };
    let share = 0.9 * cutoff.r1 / 2f64.sqrt();
    for _ in 0..opts.tracking_runs {
        let u0 = sampling::random_field(&mut rng, BasisKind::NeumannCosine, length, m, n_modes, track_spec, share);
        let v0 = sampling::random_field(&mut rng, BasisKind::DirichletSine, length, m, n_modes, track_spec, share);
        let traj = ntr.evolve(&Block { parts: vec![u0, v0] }, opts.tracking_time, opts.dt, stride_for(opts.tracking_every, opts.dt))?;
        tracking.push(tracking_perron(&ntr, &cfg, &traj.times, &traj.states, opts.dt)?);
    }

    let report = NeumannPipelineReport {
        absorbing_radius: absorbing,
        image_radius,
        r1: cutoff.r1,
        r: cutoff.r,
        embedding,
        drift,
        lipschitz,
        graph_loo_error: graph.loo_error()?,
        graph_lipschitz: graph.lipschitz_sampled(),
        choice,
        low_dimension,
        invariance,
        tracking,
    };
    Ok((graph, report))
}
