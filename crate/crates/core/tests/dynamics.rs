use imlab_core::dynamics::{dissipative_monitor, evolve, phi1};
use imlab_core::nonlinearity::presets;
use imlab_core::sampling::{self, Spectrum};
use imlab_core::{BasisKind, Grid, SpectralField};

const PI: f64 = std::f64::consts::PI;

#[test]
fn heat_modes_decay_exactly() {
    let grid = Grid::new(16, PI).unwrap();
    let u0 = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 16, 0, 3).unwrap();
    let traj = evolve(&u0, 0.5, 1e-2, &presets::zero::<f64>(1), &grid).unwrap();
    let c = traj.last().unwrap().coeffs()[2];
    assert!((c - (-9.0f64 * 0.5).exp()).abs() < 1e-13, "{c}");
}

#[test]
fn phi1_limits() {
    assert_eq!(phi1(0.0f64), 1.0);
    assert!((phi1(1e-9f64) - 1.0).abs() < 1e-9);
    assert!((phi1(2.0f64) - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
}

#[test]
fn burgers_trajectories_are_dissipative() {
    let grid = Grid::new(64, PI).unwrap();
    let nl = presets::burgers_cutoff::<f64>();
    let mut rng = sampling::rng(11);
    for _ in 0..3 {
        let u0 = sampling::random_field(&mut rng, BasisKind::DirichletSine, PI, 1, 64, Spectrum::Smooth { decay: 1.0, max_mode: 16 }, 4.0);
        let traj = evolve(&u0, 5.0, 1e-3, &nl, &grid).unwrap();
        let rep = dissipative_monitor(&traj).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert!(traj.h1_norms().last().unwrap() < &4.0);
    }
}
