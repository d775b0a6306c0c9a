use imlab_core::neumann::elliptic::{rred_rhs, upsilon_audit};
use imlab_core::neumann::{
    constraint_drift, embed, embedding_audit, upsilon_solve, EllipticConfig, ExtendedSystem, NeumannTransformed,
};
use imlab_core::nonlinearity::{gradient_presets, presets};
use imlab_core::sampling::{self, Spectrum};
use imlab_core::transformed::CutoffSpec;
use imlab_core::{BasisKind, Block, Error, Grid, SpectralField};

const PI: f64 = std::f64::consts::PI;

fn neumann_field(seed: u64, m: usize, n: usize, norm: f64) -> SpectralField {
    let mut rng = sampling::rng(seed);
    sampling::random_field(&mut rng, BasisKind::NeumannCosine, PI, m, n, Spectrum::Smooth { decay: 2.0, max_mode: 12 }, norm)
}

#[test]
fn embedding_pairs_a_field_with_its_derivative() {
    let u = SpectralField::mode(BasisKind::NeumannCosine, PI, 1, 16, 0, 3).unwrap();
    let b = embed(&u).unwrap();
    assert_eq!(b.parts[1].basis(), BasisKind::DirichletSine);
    let want = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 16, 0, 3).unwrap().scale(-3.0);
    assert!(b.parts[1].sub(&want).unwrap().l2_norm() < 1e-14);
    let d = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 16, 0, 3).unwrap();
    assert!(matches!(embed(&d), Err(Error::BasisMismatch(_))));
}

#[test]
fn embedding_norm_ratios_stay_in_range() {
    let samples: Vec<_> = (0..6).map(|s| neumann_field(s, 1, 32, 0.5 + s as f64)).collect();
    let a = embedding_audit(&samples).unwrap();
    assert!(a.min_ratio >= 1.0 - 1e-12 && a.max_ratio <= 2f64.sqrt() + 1e-12, "{a:?}");
}

#[test]
fn without_nonlinearity_the_constraint_is_exact() {
    let grid = Grid::new(32, PI).unwrap();
    let sys = ExtendedSystem::new(presets::zero::<f64>(2), grid);
    let traj = sys.evolve(&embed(&neumann_field(4, 2, 32, 1.0)).unwrap(), 1.0, 1e-3, 100).unwrap();
    let d = constraint_drift(&traj).unwrap();
    assert!(d.drift.iter().all(|x| *x < 1e-12), "{:?}", d.drift);
    let u = &traj.states.last().unwrap().parts[0];
    // the constant mode decays like e^{−t}
    let c0 = neumann_field(4, 2, 32, 1.0).coeffs()[0];
    assert!((u.coeffs()[0] - c0 * (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn constraint_drift_stays_at_discretization_level() {
    let grid = Grid::new(64, PI).unwrap();
    let sys = ExtendedSystem::new(presets::burgers_cutoff::<f64>(), grid);
    let traj = sys.evolve(&embed(&neumann_field(8, 1, 64, 1.0)).unwrap(), 2.0, 1e-3, 50).unwrap();
    let d = constraint_drift(&traj).unwrap();
    assert!(d.slope <= 1e-3, "{}", d.slope);
    assert!(d.drift.iter().copied().fold(0.0, f64::max) < 1e-2);
}

#[test]
fn transformed_neumann_variables_roundtrip() {
    // a(u)w has a non-vanishing second derivative at the walls, so the sine
    // series converges algebraically rather than spectrally
    let err = |n: usize| {
        let grid = Grid::new(n, PI).unwrap();
        let nt = NeumannTransformed::new(presets::coupled_2d::<f64>(), grid, 8, CutoffSpec::from_measured(2.0)).unwrap();
        let state = embed(&neumann_field(2, 2, n, 0.8)).unwrap();
        let back = nt.inverse(&nt.forward(&state).unwrap()).unwrap();
        back.parts.iter().zip(&state.parts).map(|(a, b)| a.sub(b).unwrap().h1_norm()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(64), err(128));
    assert!(fine < 1e-5, "{fine}");
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

#[test]
fn upsilon_is_diagonal_without_nonlinearity() {
    let grid = Grid::new(32, PI).unwrap();
    let cfg = EllipticConfig { n_shift: 3.0, tol: 1e-12, max_newton: 5, max_inner: 100 };
    let h = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 32, 0, 2).unwrap();
    let sol = upsilon_solve(&grid, &gradient_presets::zero::<f64>(1), &h, &cfg).unwrap();
    // u'' − (1 + N)u = h on a single mode
    let want = h.scale(-1.0 / (4.0 + 1.0 + 3.0));
    assert!(sol.u.sub(&want).unwrap().l2_norm() < 1e-14);
}

#[test]
fn upsilon_solves_and_contracts_for_the_general_preset() {
    let grid = Grid::new(32, PI).unwrap();
    let nl = gradient_presets::general::<f64>(1);
    let cfg = EllipticConfig::for_nonlinearity(&nl, 3);
    let audit = upsilon_audit(&grid, &nl, &cfg, 10, 2.0, 5).unwrap();
    assert!(audit.max_residual <= cfg.tol);
    assert_eq!(audit.violations, 0);
    assert!(audit.max_ratio <= 1.0);
    assert!(cfg.n_shift > audit.threshold);
}

#[test]
fn x_differentiated_system_needs_vanishing_f() {
    let grid = Grid::new(16, PI).unwrap();
    let z = |b| SpectralField::zeros(b, PI, 1, 16);
    let state = Block {
        parts: vec![z(BasisKind::DirichletSine), z(BasisKind::NeumannCosine), z(BasisKind::DirichletSine)],
    };
    let err = rred_rhs(&grid, &gradient_presets::general::<f64>(1), &state).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    let ok = rred_rhs(&grid, &gradient_presets::quadratic::<f64>(1), &state).unwrap();
    assert!(ok.parts.iter().all(|p| p.l2_norm() == 0.0));
}
