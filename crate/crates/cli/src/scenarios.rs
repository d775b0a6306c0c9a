//! Scenario runners. Each writes its artifacts and a `summary.json` into
//! `<out>/<scenario>/` and returns the summary.

use std::fs;
use std::path::{Path, PathBuf};

use imlab_core::diffeo::Diffeo;
use imlab_core::dynamics::{self, dissipative_monitor, EvolveOptions};
use imlab_core::manifold::{
    build_manifold, dirichlet_pipeline, invariance_residual, perron_solve, resolvent_norms, spectral_gap_check, Layout,
    LinearForcing, PerronConfig, PipelineOptions, SAFETY_FACTOR,
};
use imlab_core::neumann::elliptic::{upsilon_audit, EllipticConfig};
use imlab_core::neumann::neumann_manifold_pipeline;
use imlab_core::nonlinearity::presets;
use imlab_core::sampling::{self, Spectrum};
use imlab_core::spectral::{eigenvalue, gap_difference, gap_ratio};
use imlab_core::transformed::{equivalence_check, k_scaling, lipschitz_report, sample_pairs, CutoffSpec, Transformed};
use imlab_core::{BasisKind, Block, SpectralField};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{self, ExperimentConfig, Preset, Scenario};

/// One pass/fail check; `criterion` is the acceptance criterion it feeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: Option<u8>,
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn le(criterion: u8, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { criterion: Some(criterion), name: name.into(), value, bound: format!("<= {bound:e}"), pass: value <= bound }
    }

    pub fn ge(criterion: u8, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { criterion: Some(criterion), name: name.into(), value, bound: format!(">= {bound:e}"), pass: value >= bound }
    }

    pub fn within(criterion: u8, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            criterion: Some(criterion),
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            pass: value >= lo && value <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub preset: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

/// Written instead of a summary when a scenario aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub scenario: String,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(String),
    Numerical(String),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "configuration",
            RunError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Numerical(m) => m,
        }
    }
}

impl From<imlab_core::Error> for RunError {
    fn from(e: imlab_core::Error) -> Self {
        use imlab_core::Error as E;
        if e.is_configuration() || matches!(e, E::Precondition(_) | E::Resolution(_)) {
            RunError::Config(e.to_string())
        } else {
            RunError::Numerical(e.to_string())
        }
    }
}

impl From<config::ConfigError> for RunError {
    fn from(e: config::ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Config(format!("{}: {e}", path.display()))
}

type Run<T> = Result<T, RunError>;

/// Artifact sink for one scenario.
struct Sink {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Sink {
    fn new(dir: PathBuf) -> Run<Self> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Sink { dir, artifacts: Vec::new() })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Run<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Run<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn summary_path(out: &Path, scenario: Scenario) -> PathBuf {
    out.join(scenario.name()).join("summary.json")
}

/// Runs one scenario, writing `summary.json` or `error.json`.
pub fn run_scenario(cfg: &ExperimentConfig, scenario: Scenario) -> Run<Summary> {
    let dir = cfg.out.join(scenario.name());
    let _ = fs::remove_file(dir.join("error.json"));
    let _ = fs::remove_file(dir.join("summary.json"));
    let mut sink = Sink::new(dir.clone())?;
    let result = match scenario {
        Scenario::Roundtrip => roundtrip(cfg, &mut sink),
        Scenario::KScaling => k_scaling_run(cfg, &mut sink),
        Scenario::GapTable => gap_table(cfg, &mut sink),
        Scenario::BuildManifold => build(cfg, &mut sink),
        Scenario::Tracking => tracking(cfg, &mut sink),
        Scenario::Invariance => invariance(cfg, &mut sink),
        Scenario::Equivalence => equivalence(cfg, &mut sink),
        Scenario::NeumannPipeline => neumann(cfg, &mut sink),
        Scenario::UpsilonAudit => upsilon(cfg, &mut sink),
    };
    match result {
        Ok(checks) => {
            let summary = Summary {
                scenario: scenario.name().into(),
                seed: cfg.seed,
                preset: cfg.problem.preset.name().into(),
                pass: checks.iter().all(|c| c.pass),
                checks,
                artifacts: sink.artifacts.clone(),
            };
            sink.json("summary.json", &summary)?;
            Ok(summary)
        }
        Err(e) => {
            let rec = ErrorRecord {
                scenario: scenario.name().into(),
                seed: cfg.seed,
                kind: e.kind().into(),
                message: e.message().into(),
            };
            sink.json("error.json", &rec)?;
            Err(e)
        }
    }
}

pub fn summary_exists(out: &Path, scenario: Scenario) -> bool {
    summary_path(out, scenario).exists()
}

fn semilinear(cfg: &ExperimentConfig, scenario: &str) -> Run<imlab_core::nonlinearity::CutoffNonlinearity<f64>> {
    config::semilinear(cfg.problem.preset, cfg.m())
        .ok_or_else(|| RunError::Config(format!("{scenario} needs a semilinear preset, not {}", cfg.problem.preset.name())))
}

fn pipeline_options(cfg: &ExperimentConfig, tracking_runs: usize) -> PipelineOptions {
    let m = &cfg.manifold;
    PipelineOptions {
        seed: cfg.seed,
        dt: cfg.problem.dt,
        absorb_runs: m.absorb_runs,
        absorb_time: m.absorb_time,
        absorb_norm: m.absorb_norm,
        k_start: m.k_start,
        k: cfg.problem.k,
        n: cfg.problem.n,
        lipschitz_pairs: m.lipschitz_pairs,
        base_points: m.base_points,
        tracking_runs,
        tracking_time: m.tracking_time,
        tracking_every: m.tracking_every,
    }
}

#[derive(Serialize)]
struct RoundtripRow {
    index: usize,
    h1_norm: f64,
    deviation: f64,
}

fn roundtrip(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let r = &cfg.roundtrip;
    let nl = semilinear(cfg, "roundtrip")?;
    let grid = config::grid(p.length, p.n_total)?;
    let m = cfg.m();
    let d = Diffeo::new(nl, grid.clone(), p.k.unwrap_or(8))?;
    let mut rng = sampling::rng(cfg.seed);
    let spectrum = Spectrum::Smooth { decay: 1.0, max_mode: r.max_mode };
    let mut rows = Vec::new();
    for index in 0..r.fields {
        let v = sampling::random_in_ball(&mut rng, BasisKind::DirichletSine, p.length, m, p.n_total, spectrum, r.radius);
        let deviation = d.inverse_map(&d.forward_map(&v)?)?.sub(&v)?.h1_norm();
        rows.push(RoundtripRow { index, h1_norm: v.h1_norm(), deviation });
    }
    sink.csv("roundtrip.csv", &rows)?;
    let tol = if p.preset == Preset::Zero { r.tol.min(1e-12) } else { r.tol };
    let worst = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let mut checks = vec![Check::le(2, "max roundtrip deviation (H1)", worst, tol)];

    // a(x) = exp(Ax/2) when f ≡ A inside the cut-off
    let a = [0.3, -0.5, 0.4, 0.1];
    let cm = Diffeo::new(presets::constant_matrix(a.to_vec(), 2.0), grid.clone(), 8)?;
    let v = sampling::random_field(&mut rng, BasisKind::DirichletSine, p.length, 2, p.n_total, spectrum, 0.1);
    let field = cm.solve_a_of_v(&v)?;
    let am = DMatrix::from_row_slice(2, 2, &a);
    let mut closed = 0.0_f64;
    for (j, &x) in grid.points().iter().enumerate() {
        let e = (&am * (0.5 * x)).exp();
        let got = field.at(j);
        for i in 0..4 {
            closed = closed.max((got[i] - e[(i / 2, i % 2)]).abs());
        }
    }
    checks.push(Check::le(2, "constant-matrix kernel vs exp(Ax/2)", closed, 1e-8));
    Ok(checks)
}

fn k_scaling_run(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let ks = &cfg.k_scaling;
    let nl = semilinear(cfg, "k-scaling")?;
    let grid = config::grid(cfg.problem.length, ks.n_total)?;
    let rep = k_scaling(&nl, &grid, CutoffSpec::from_measured(ks.radius), &ks.ks, ks.samples, cfg.seed)?;
    sink.csv("kscaling.csv", &rep.rows)?;
    sink.json("kscaling.json", &rep)?;
    Ok(vec![
        Check::within(3, "slope of sup |F1| vs K", rep.f1_slope, ks.slope_min, ks.slope_max),
        Check::within(3, "slope of L1 vs K", rep.l1_slope, ks.slope_min, ks.slope_max),
    ])
}

#[derive(Serialize)]
struct GapRow {
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L1")]
    l1: f64,
    #[serde(rename = "L2")]
    l2: f64,
    lambda_n: f64,
    lambda_n1: f64,
    gap_diff: f64,
    ratio: f64,
    cond1: bool,
    cond2: bool,
    budget: f64,
    pass: bool,
}

fn gap_table(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let g = &cfg.gap_table;
    let nl = semilinear(cfg, "gap-table")?;
    let grid = config::grid(p.length, p.n_total)?;
    let cutoff = CutoffSpec::from_measured(g.radius);
    let template = SpectralField::zeros(BasisKind::DirichletSine, p.length, cfg.m(), p.n_total);
    let pairs = sample_pairs(cfg.seed, &template, cutoff.r, g.lipschitz_pairs);
    let mut rows = Vec::new();
    for &k in &g.ks {
        let (l1, l2) = if p.preset == Preset::Zero {
            (0.0, 0.0)
        } else {
            let rep = lipschitz_report(&Transformed::new(Diffeo::new(nl.clone(), grid.clone(), k)?, cutoff), &pairs)?;
            (rep.l1, rep.l2)
        };
        for n in 1..=g.n_max {
            let r = spectral_gap_check(n, p.length, k, SAFETY_FACTOR * l1, SAFETY_FACTOR * l2);
            rows.push(GapRow {
                n,
                k,
                l1,
                l2,
                lambda_n: r.lambda_n,
                lambda_n1: r.lambda_n1,
                gap_diff: r.gap,
                ratio: gap_ratio(n, p.length),
                cond1: r.cond1,
                cond2: r.cond2,
                budget: r.budget,
                pass: r.pass,
            });
        }
    }
    sink.csv("gap_table.csv", &rows)?;

    let q = std::f64::consts::PI / p.length;
    let (mut ratio_err, mut diff_exact, mut diff_err) = (0.0_f64, true, 0.0_f64);
    for n in 1..=g.arithmetic_n {
        ratio_err = ratio_err.max((gap_ratio(n, p.length) - q).abs() / q);
        let d = gap_difference(n, p.length);
        diff_exact &= d == q * q * (2 * n + 1) as f64;
        let direct = eigenvalue(n + 1, p.length, BasisKind::DirichletSine)? - eigenvalue(n, p.length, BasisKind::DirichletSine)?;
        diff_err = diff_err.max((d - direct).abs() / d);
    }
    let mut checks = vec![
        Check::le(1, "gap_ratio relative error vs pi/L", ratio_err, 1e-14),
        Check::le(1, "gap_difference vs (pi/L)^2 (2n+1) mismatches", if diff_exact { 0.0 } else { 1.0 }, 0.0),
        Check::le(1, "gap_difference vs eigenvalue differences (relative)", diff_err, 1e-10),
    ];
    let mut norms = Vec::new();
    for &n in &g.resolvent_levels {
        let pc = PerronConfig::dirichlet(n, 8, p.length, 0.0)?;
        let r = resolvent_norms(&pc, p.length, 2 * n + 6, g.resolvent_iterations)?;
        checks.push(Check::le(4, format!("resolvent Phi->Phi / bound, n={n}"), r.phi_to_phi / r.phi_bound, g.resolvent_slack));
        checks.push(Check::le(4, format!("resolvent L2->Phi / bound, n={n}"), r.l2_to_phi / r.l2_bound, g.resolvent_slack));
        norms.push(r);
    }
    sink.json("resolvent.json", &norms)?;
    Ok(checks)
}

#[derive(Serialize)]
struct DissipativityRow {
    run: usize,
    #[serde(rename = "C")]
    c: f64,
    alpha: f64,
    #[serde(rename = "C_star")]
    c_star: f64,
    ok: bool,
}

#[derive(Serialize)]
struct BaseRow {
    index: usize,
    iterations: usize,
    max_factor: f64,
    residual: f64,
}

fn perron_iteration_bound(budget: f64) -> f64 {
    ((1e-9f64).ln() / budget.ln()).ceil() + 2.0
}

fn build(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let mc = &cfg.manifold;
    let nl = semilinear(cfg, "build-manifold")?;
    let grid = config::grid(p.length, p.n_total)?;
    let mut rng = sampling::rng(cfg.seed ^ 0xd155);
    let mut rows = Vec::new();
    for run in 0..mc.dissipativity_runs {
        let spectrum = Spectrum::Smooth { decay: 2.0, max_mode: 16.min(p.n_total) };
        let u0 = sampling::random_field(&mut rng, BasisKind::DirichletSine, p.length, cfg.m(), p.n_total, spectrum, 10.0);
        let opts = EvolveOptions { stride: ((0.01 / p.dt).round() as usize).max(1), lipschitz_bound: None };
        let traj = dynamics::evolve_with(&u0, mc.dissipativity_time, p.dt, &nl, &grid, opts)?;
        let r = dissipative_monitor(&traj)?;
        rows.push(DissipativityRow { run, c: r.c, alpha: r.alpha, c_star: r.c_star, ok: r.ok });
    }
    sink.csv("dissipativity.csv", &rows)?;
    let mut checks = vec![Check::le(
        12,
        "initial data without an admissible (C, alpha, C*)",
        rows.iter().filter(|r| !r.ok).count() as f64,
        0.0,
    )];

    let (graph, report) = dirichlet_pipeline(&nl, &grid, &pipeline_options(cfg, 0))?;
    let budget = report.choice.report.budget;
    let base: Vec<BaseRow> = (0..graph.len())
        .map(|i| BaseRow {
            index: i,
            iterations: graph.iterations[i],
            max_factor: graph.factors[i],
            residual: report.invariance.residuals[i],
        })
        .collect();
    sink.csv("base_points.csv", &base)?;
    sink.json("manifold.json", &graph)?;
    sink.json("pipeline.json", &report)?;
    checks.push(Check::le(5, "gap budget", budget, 0.5));
    let max_factor = graph.factors.iter().copied().fold(0.0, f64::max);
    checks.push(Check::le(5, "max contraction factor", max_factor, budget + mc.contraction_slack));
    let max_iter = graph.iterations.iter().copied().max().unwrap_or(0) as f64;
    checks.push(Check::le(5, "max Perron iterations", max_iter, perron_iteration_bound(budget + mc.contraction_slack)));
    Ok(checks)
}

#[derive(Serialize)]
struct TrackingRow {
    run: usize,
    time: f64,
    distance: f64,
}

fn tracking(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let nl = semilinear(cfg, "tracking")?;
    let grid = config::grid(p.length, p.n_total)?;
    let (_, report) = dirichlet_pipeline(&nl, &grid, &pipeline_options(cfg, cfg.manifold.tracking_runs))?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (run, fit) in report.tracking.iter().enumerate() {
        rows.extend(fit.times.iter().zip(&fit.distances).map(|(&time, &distance)| TrackingRow { run, time, distance }));
        checks.push(Check::le(7, format!("run {run}: log-distance slope"), fit.slope, -0.5 * fit.theta));
        checks.push(Check::le(7, format!("run {run}: degenerate fit"), if fit.degenerate { 1.0 } else { 0.0 }, 0.0));
    }
    sink.csv("tracking.csv", &rows)?;
    sink.json("pipeline.json", &report)?;
    Ok(checks)
}

/// `(Perron graph − eigenvector graph)` and the invariance residual of a
/// linear forcing on the first `modes` Dirichlet modes.
pub fn linear_case(cfg: &ExperimentConfig) -> Run<(f64, f64)> {
    let mc = &cfg.manifold;
    let (s, n, length) = (mc.linear_modes, mc.linear_level, cfg.problem.length);
    let mut rng = sampling::rng(cfg.seed ^ 0x11ea);
    let b: Vec<f64> = (0..s * s).map(|_| rng.gen_range(-mc.linear_scale..mc.linear_scale)).collect();
    let forcing = LinearForcing {
        template: Block::single(SpectralField::zeros(BasisKind::DirichletSine, length, 1, s)),
        matrix: b.clone(),
        shifts: vec![0.0],
    };
    let mut pc = PerronConfig::dirichlet(n, s, length, 0.0)?;
    pc.dt = mc.linear_perron_dt;
    let layout = Layout::new(&forcing);

    let mut l = DMatrix::from_row_slice(s, s, &b);
    for k in 0..s {
        l[(k, k)] -= eigenvalue(k + 1, length, BasisKind::DirichletSine)?;
    }
    let mut ev: Vec<f64> = l.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let cols: Vec<_> = ev[..n]
        .iter()
        .map(|&lam| {
            let mut shifted = l.clone();
            for k in 0..s {
                shifted[(k, k)] -= lam;
            }
            let svd = shifted.svd(false, true);
            let vt = svd.v_t.expect("requested");
            let i = svd.singular_values.imin();
            vt.row(i).transpose()
        })
        .collect();
    let basis = DMatrix::from_columns(&cols);
    let x = basis.rows(0, n).into_owned();
    let y = basis.rows(n, s - n).into_owned();
    let graph_matrix = &y * x.try_inverse().ok_or_else(|| RunError::Numerical("slow eigenvectors not a graph".into()))?;

    let mut base = vec![vec![0.0; n]];
    for _ in 0..8 {
        base.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let mut oracle = 0.0_f64;
    for pt in &base[1..4] {
        let img = layout.flatten(&perron_solve(&forcing, &layout.from_low_coords(pt, pc.theta), &pc)?.image);
        let want = &graph_matrix * nalgebra::DVector::from_column_slice(pt);
        for i in 0..s - n {
            oracle = oracle.max((img[n + i] - want[i]).abs());
        }
    }
    let graph = build_manifold(&forcing, &base, &pc)?;
    let inv = invariance_residual(&forcing, &graph, &pc, pc.dt)?;
    Ok((oracle, inv.max_relative))
}

fn invariance(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let mc = &cfg.manifold;
    let nl = semilinear(cfg, "invariance")?;
    let grid = config::grid(p.length, p.n_total)?;
    let (graph, report) = dirichlet_pipeline(&nl, &grid, &pipeline_options(cfg, 0))?;
    sink.json("manifold.json", &graph)?;
    sink.json("invariance.json", &report.invariance)?;
    let (oracle, linear) = linear_case(cfg)?;
    sink.json("linear.json", &serde_json::json!({ "oracle_max_abs": oracle, "invariance_max_relative": linear }))?;
    Ok(vec![
        Check::le(8, "max invariance residual / (1 + |p|)", report.invariance.max_relative, mc.invariance_tol),
        Check::le(8, "linear case: max invariance residual / (1 + |p|)", linear, mc.linear_invariance_tol),
        Check::le(6, "linear case: Perron graph vs eigenvector graph", oracle, mc.linear_oracle_tol),
    ])
}

fn equivalence(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let e = &cfg.equivalence;
    let nl = semilinear(cfg, "equivalence")?;
    let grid = config::grid(p.length, p.n_total)?;
    let tr = Transformed::new(Diffeo::new(nl, grid, p.k.unwrap_or(8))?, CutoffSpec::from_measured(e.radius));
    let mut rng = sampling::rng(cfg.seed);
    let spectrum = Spectrum::Smooth { decay: 2.0, max_mode: 16.min(p.n_total) };
    let u0 = sampling::random_field(&mut rng, BasisKind::DirichletSine, p.length, cfg.m(), p.n_total, spectrum, e.norm);
    let stride = |dt: f64| ((0.05 / dt).round() as usize).max(1);
    let d1 = equivalence_check(&tr, &u0, e.t_final, p.dt, stride(p.dt))?;
    let d2 = equivalence_check(&tr, &u0, e.t_final, 0.5 * p.dt, stride(0.5 * p.dt))?;
    #[derive(Serialize)]
    struct Row {
        dt: f64,
        deviation: f64,
    }
    sink.csv("equivalence.csv", &[Row { dt: p.dt, deviation: d1 }, Row { dt: 0.5 * p.dt, deviation: d2 }])?;
    let ratio = if d1 > 0.0 { d2 / d1 } else { 0.0 };
    Ok(vec![
        Check::le(9, "max-t deviation at dt", d1, e.max_deviation),
        Check::le(9, "deviation(dt/2) / deviation(dt)", ratio, e.max_halving_ratio),
    ])
}

fn neumann(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let nc = &cfg.neumann;
    let nl = semilinear(cfg, "neumann-pipeline")?;
    let grid = config::grid(p.length, p.n_total)?;
    let opts = PipelineOptions {
        absorb_time: nc.absorb_time,
        lipschitz_pairs: nc.lipschitz_pairs,
        base_points: nc.base_points,
        tracking_runs: nc.tracking_runs,
        tracking_time: nc.tracking_time,
        ..pipeline_options(cfg, nc.tracking_runs)
    };
    let (graph, report) = neumann_manifold_pipeline(&nl, &grid, &opts, nc.drift_time)?;
    sink.json("manifold.json", &graph)?;
    sink.json("pipeline.json", &report)?;
    #[derive(Serialize)]
    struct DriftRow {
        run: usize,
        time: f64,
        drift: f64,
    }
    let rows: Vec<DriftRow> = report
        .drift
        .iter()
        .enumerate()
        .flat_map(|(run, d)| d.times.iter().zip(&d.drift).map(move |(&time, &drift)| DriftRow { run, time, drift }))
        .collect();
    sink.csv("drift.csv", &rows)?;
    let mut checks = Vec::new();
    for (run, d) in report.drift.iter().enumerate() {
        checks.push(Check::le(11, format!("run {run}: constraint drift slope"), d.slope, nc.drift_c * d.dt));
    }
    for (run, fit) in report.tracking.iter().enumerate() {
        checks.push(Check::le(11, format!("run {run}: extended log-distance slope"), fit.slope, -0.5 * fit.theta));
        checks.push(Check::le(11, format!("run {run}: degenerate fit"), if fit.degenerate { 1.0 } else { 0.0 }, 0.0));
    }
    checks.push(Check::ge(11, "embedding min ratio", report.embedding.min_ratio, 1.0 - 1e-12));
    checks.push(Check::le(11, "embedding max ratio", report.embedding.max_ratio, std::f64::consts::SQRT_2 + 1e-12));
    Ok(checks)
}

fn upsilon(cfg: &ExperimentConfig, sink: &mut Sink) -> Run<Vec<Check>> {
    let p = &cfg.problem;
    let uc = &cfg.upsilon;
    let nl = config::gradient(p.preset, cfg.m()).ok_or_else(|| {
        RunError::Config(format!("upsilon-audit needs a gradient preset (zero or general-f(u,ux)), not {}", p.preset.name()))
    })?;
    let grid = config::grid(p.length, p.n_total)?;
    let ec = EllipticConfig { max_newton: uc.max_newton, ..EllipticConfig::for_nonlinearity(&nl, cfg.seed) };
    let audit = upsilon_audit(&grid, &nl, &ec, uc.pairs, uc.scale, cfg.seed)?;
    sink.json("upsilon.json", &audit)?;
    Ok(vec![
        Check::le(10, "max residual", audit.max_residual, ec.tol),
        Check::le(10, "stability violations", audit.violations as f64, 0.0),
        Check::le(10, "max Newton iterations", audit.max_newton as f64, uc.max_newton as f64),
        Check::ge(10, "N_shift / threshold", audit.n_shift / audit.threshold, 1.0),
    ])
}
