use imlab_core::diffeo::Diffeo;
use imlab_core::nonlinearity::presets;
use imlab_core::sampling::{self, Spectrum};
use imlab_core::transformed::{equivalence_check, CutoffSpec, Transformed};
use imlab_core::{BasisKind, Grid, SpectralField};
use nalgebra::DMatrix;
use proptest::prelude::*;

const PI: f64 = std::f64::consts::PI;

fn smooth(seed: u64, m: usize, n: usize, norm: f64) -> SpectralField {
    let mut rng = sampling::rng(seed);
    sampling::random_field(&mut rng, BasisKind::DirichletSine, PI, m, n, Spectrum::Smooth { decay: 1.0, max_mode: 16 }, norm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn roundtrip_in_the_working_ball(seed in 0u64..1000, norm in 0.05f64..1.0) {
        let grid = Grid::new(128, PI).unwrap();
        let d = Diffeo::new(presets::coupled_2d::<f64>(), grid, 8).unwrap();
        let v = smooth(seed, 2, 128, norm);
        let u = d.forward_map(&v).unwrap();
        prop_assert!(d.inverse_map(&u).unwrap().sub(&v).unwrap().h1_norm() <= 1e-8);
    }
}

#[test]
fn constant_matrix_kernel_is_matrix_exponential() {
    let grid = Grid::new(64, PI).unwrap();
    let a = [0.2, 0.7, -0.4, -0.1];
    let d = Diffeo::new(presets::constant_matrix(a.to_vec(), 2.0), grid.clone(), 8).unwrap();
    let field = d.solve_a_of_v(&smooth(3, 2, 64, 0.2)).unwrap();
    let am = DMatrix::from_row_slice(2, 2, &a);
    for (j, &x) in grid.points().iter().enumerate() {
        let e = (&am * (0.5 * x)).exp();
        for i in 0..4 {
            assert!((field.at(j)[i] - e[(i / 2, i % 2)]).abs() < 1e-8);
        }
    }
}

#[test]
fn zero_nonlinearity_is_identity_map() {
    let grid = Grid::new(32, PI).unwrap();
    let d = Diffeo::new(presets::zero::<f64>(3), grid, 4).unwrap();
    let v = smooth(9, 3, 32, 0.7);
    assert!(d.forward_map(&v).unwrap().sub(&v).unwrap().h1_norm() < 1e-14);
}

#[test]
fn transformed_flow_tracks_original_to_first_order() {
    let grid = Grid::new(64, PI).unwrap();
    let tr = Transformed::new(Diffeo::new(presets::burgers_cutoff::<f64>(), grid, 8).unwrap(), CutoffSpec::from_measured(0.5));
    let u0 = smooth(1, 1, 64, 0.3);
    let coarse = equivalence_check(&tr, &u0, 0.5, 2e-3, 50).unwrap();
    let fine = equivalence_check(&tr, &u0, 0.5, 1e-3, 100).unwrap();
    assert!(coarse < 1e-4, "{coarse}");
    assert!((fine / coarse - 0.5).abs() < 0.1, "{coarse} {fine}");
}

#[test]
fn cut_off_removes_forcing_outside_the_ball() {
    let grid = Grid::new(64, PI).unwrap();
    let cutoff = CutoffSpec::from_measured(0.2);
    let tr = Transformed::new(Diffeo::new(presets::burgers_cutoff::<f64>(), grid, 8).unwrap(), cutoff);
    let far = smooth(2, 1, 64, 1.1 * cutoff.r);
    assert_eq!(tr.forcing_1(&far, None).unwrap().l2_norm(), 0.0);
    assert_eq!(tr.forcing_2(&far, None).unwrap().l2_norm(), 0.0);
    let near = smooth(2, 1, 64, 0.5 * cutoff.r1);
    assert!(tr.forcing_2(&near, None).unwrap().l2_norm() > 0.0);
}
