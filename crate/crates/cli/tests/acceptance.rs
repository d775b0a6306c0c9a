//! Acceptance run: one line per criterion. Heavy scenarios run with the
//! reference defaults on parallel threads; the spectral arithmetic, the
//! constant-matrix kernel and the linear oracle are recomputed here from
//! closed forms and a dense eigensolver.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use imlab::config::{ExperimentConfig, Scenario};
use imlab::report::CRITERIA;
use imlab::scenarios::{run_scenario, Check};
use imlab_core::diffeo::Diffeo;
use imlab_core::manifold::{perron_solve, Layout, LinearForcing, PerronConfig};
use imlab_core::nonlinearity::presets;
use imlab_core::spectral::{eigenvalue, gap_difference, gap_ratio};
use imlab_core::{BasisKind, Block, Grid, SpectralField};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

const PI: f64 = std::f64::consts::PI;

struct Outcome {
    checks: Vec<Check>,
    notes: Vec<String>,
}

fn scenario(toml: &str, s: Scenario) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml(toml).unwrap();
    cfg.out = dir.path().to_path_buf();
    let t = Instant::now();
    match run_scenario(&cfg, s) {
        Ok(sum) => Outcome { checks: sum.checks, notes: vec![format!("{} {:.1}s", s.name(), t.elapsed().as_secs_f64())] },
        Err(e) => Outcome { checks: vec![], notes: vec![format!("{} error: {}", s.name(), e.message())] },
    }
}

fn spectral_arithmetic() -> Outcome {
    let mut ratio_err: f64 = 0.0;
    let mut diff_exact = true;
    for length in [1.0, PI, 7.5] {
        let q = PI / length;
        for n in 1..=10_000usize {
            ratio_err = ratio_err.max((gap_ratio::<f64>(n, length) - q).abs() / q);
            diff_exact &= gap_difference::<f64>(n, length) == q * q * (2 * n + 1) as f64;
        }
    }
    Outcome {
        checks: vec![
            Check::le(1, "gap ratio relative error, n <= 1e4", ratio_err, 1e-14),
            Check::le(1, "gap difference mismatches", if diff_exact { 0.0 } else { 1.0 }, 0.0),
        ],
        notes: vec![],
    }
}

fn constant_matrix_kernel() -> Outcome {
    let grid = Grid::new(128, PI).unwrap();
    let a = [0.3, -0.5, 0.8, -0.2];
    let d = Diffeo::new(presets::constant_matrix(a.to_vec(), 2.0), grid.clone(), 8).unwrap();
    let v = SpectralField::zeros(BasisKind::DirichletSine, PI, 2, 128);
    let field = d.solve_a_of_v(&v).unwrap();
    let am = DMatrix::from_row_slice(2, 2, &a);
    let mut worst: f64 = 0.0;
    for (j, &x) in grid.points().iter().enumerate() {
        let e = (&am * (0.5 * x)).exp();
        for i in 0..4 {
            worst = worst.max((field.at(j)[i] - e[(i / 2, i % 2)]).abs());
        }
    }
    Outcome { checks: vec![Check::le(2, "exp(Ax/2) kernel, max abs error", worst, 1e-8)], notes: vec![] }
}

/// Graph of the slow invariant subspace of `−Λ + B` over the first `n` modes.
fn eigen_graph(l: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let s = l.nrows();
    let mut ev: Vec<f64> = l.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let cols: Vec<DVector<f64>> = ev[..n]
        .iter()
        .map(|&lam| {
            let svd = (l - DMatrix::identity(s, s) * lam).svd(false, true);
            svd.v_t.unwrap().row(svd.singular_values.imin()).transpose()
        })
        .collect();
    let basis = DMatrix::from_columns(&cols);
    basis.rows(n, s - n) * basis.rows(0, n).try_inverse().unwrap()
}

fn linear_oracle() -> Outcome {
    let (s, n) = (6, 3);
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let b: Vec<f64> = (0..s * s).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let f = LinearForcing {
        template: Block::single(SpectralField::zeros(BasisKind::DirichletSine, PI, 1, s)),
        matrix: b.clone(),
        shifts: vec![0.0],
    };
    let mut pc = PerronConfig::dirichlet(n, s, PI, 0.0).unwrap();
    pc.dt = 1e-4;
    let layout = Layout::new(&f);
    let mut l = DMatrix::from_row_slice(s, s, &b);
    for k in 0..s {
        l[(k, k)] -= eigenvalue(k + 1, PI, BasisKind::DirichletSine).unwrap();
    }
    let g = eigen_graph(&l, n);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let img = layout.flatten(&perron_solve(&f, &layout.from_low_coords(&p, pc.theta), &pc).unwrap().image);
        let want = &g * DVector::from_column_slice(&p);
        for i in 0..s - n {
            worst = worst.max((img[n + i] - want[i]).abs());
        }
    }
    Outcome { checks: vec![Check::le(6, "6-mode Perron graph vs eigenspace (test oracle)", worst, 1e-8)], notes: vec![] }
}

#[test]
fn acceptance() {
    let coupled = "[problem]\npreset = \"coupled-2d-system\"\n";
    let general = "[problem]\npreset = \"general-f(u,ux)\"\n";
    let jobs: Vec<Box<dyn FnOnce() -> Outcome + Send>> = vec![
        Box::new(spectral_arithmetic),
        Box::new(constant_matrix_kernel),
        Box::new(linear_oracle),
        Box::new(|| scenario("", Scenario::GapTable)),
        Box::new(move || scenario(coupled, Scenario::Roundtrip)),
        Box::new(|| scenario("", Scenario::KScaling)),
        Box::new(move || scenario(coupled, Scenario::KScaling)),
        Box::new(|| scenario("", Scenario::BuildManifold)),
        Box::new(|| scenario("", Scenario::Invariance)),
        Box::new(|| scenario("", Scenario::Tracking)),
        Box::new(|| scenario("", Scenario::Equivalence)),
        Box::new(move || scenario(general, Scenario::UpsilonAudit)),
        Box::new(|| scenario("", Scenario::NeumannPipeline)),
    ];
    let outcomes: Vec<Outcome> =
        std::thread::scope(|sc| jobs.into_iter().map(|j| sc.spawn(j)).collect::<Vec<_>>().into_iter().map(|h| h.join().unwrap()).collect());

    let mut by: BTreeMap<u8, Vec<&Check>> = BTreeMap::new();
    for c in outcomes.iter().flat_map(|o| &o.checks) {
        by.entry(c.criterion.unwrap_or(0)).or_default().push(c);
    }
    // written to the real stdout so the lines show without --nocapture
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for (id, name, _) in CRITERIA {
        let checks = by.get(&id).cloned().unwrap_or_default();
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        let worst = checks.iter().find(|c| !c.pass).or(checks.first());
        let detail = worst.map(|c| format!("{}: {:.3e} ({})", c.name, c.value, c.bound)).unwrap_or_else(|| "no checks".into());
        let status = if pass { "PASS" } else { "FAIL" };
        writeln!(out, "AC{id:<2} {name:<40} {status}  [{} checks; {detail}]", checks.len()).unwrap();
        if !pass {
            failed.push(id);
        }
    }
    for n in outcomes.iter().flat_map(|o| &o.notes) {
        writeln!(out, "  {n}").unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
