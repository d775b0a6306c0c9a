use approx::assert_relative_eq;
use imlab_core::spectral::{direct, eigenvalue, BasisKind};
use imlab_core::{Grid, SpectralField};
use proptest::prelude::*;

const PI: f64 = std::f64::consts::PI;

fn field(basis: BasisKind, length: f64, m: usize, n: usize, coeffs: &[f64]) -> SpectralField {
    let count = m * basis.coeff_count(n);
    let c: Vec<f64> = coeffs.iter().cycle().take(count).enumerate().map(|(i, x)| x / (1.0 + i as f64)).collect();
    SpectralField::from_coeffs(basis, length, m, n, c).unwrap()
}

fn basis() -> impl Strategy<Value = BasisKind> {
    prop_oneof![Just(BasisKind::DirichletSine), Just(BasisKind::NeumannCosine)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_synthesis_matches_direct_sums(
        b in basis(),
        n in 4usize..40,
        m in 1usize..3,
        length in 0.5f64..5.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let grid = Grid::new(n, length).unwrap();
        let v = field(b, length, m, n, &coeffs);
        let fast = grid.synthesize(&v).unwrap();
        let slow = direct::synthesize(&v, &grid);
        for c in 0..m {
            for (a, e) in fast.component(c).iter().zip(slow.component(c)) {
                prop_assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis(
        b in basis(),
        n in 4usize..40,
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let grid = Grid::new(n, 2.0).unwrap();
        let v = field(b, 2.0, 2, n, &coeffs);
        let back = grid.analyze(&grid.synthesize(&v).unwrap(), b).unwrap();
        prop_assert!(back.sub(&v).unwrap().l2_norm() < 1e-12);
        let slow = direct::analyze(&grid.synthesize(&v).unwrap(), b, &grid);
        prop_assert!(slow.sub(&v).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn parseval_on_the_grid(
        b in basis(),
        n in 4usize..40,
        length in 0.5f64..5.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let grid = Grid::new(n, length).unwrap();
        let v = field(b, length, 1, n, &coeffs);
        let s = grid.synthesize(&v).unwrap();
        let sq: Vec<f64> = s.component(0).iter().map(|x| x * x).collect();
        assert_relative_eq!(grid.integrate(&sq).sqrt(), v.l2_norm(), max_relative = 1e-12);
    }

    #[test]
    fn projectors_split_orthogonally(
        b in basis(),
        n in 8usize..40,
        k in 1usize..8,
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let v = field(b, PI, 2, n, &coeffs);
        let lo = v.project_low(k).unwrap();
        let hi = v.project_high(k).unwrap();
        prop_assert!(lo.add(&hi).unwrap().sub(&v).unwrap().l2_norm() < 1e-15);
        prop_assert!(lo.project_low(k).unwrap().sub(&lo).unwrap().l2_norm() == 0.0);
        prop_assert!(lo.h1_inner(&hi).abs() < 1e-14);
        assert_relative_eq!(v.h1_norm_sq(), lo.h1_norm_sq() + hi.h1_norm_sq(), max_relative = 1e-12);
    }

    #[test]
    fn derivative_matches_finite_differences(
        b in basis(),
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let (n, length) = (12, 2.5);
        let v = field(b, length, 1, n, &coeffs);
        let d = v.derivative();
        prop_assert_eq!(d.basis(), b.derivative_basis());
        let h = 1e-5;
        let xs: Vec<f64> = (1..20).map(|i| i as f64 * length / 20.0).collect();
        let plus: Vec<f64> = xs.iter().map(|x| x + h).collect();
        let minus: Vec<f64> = xs.iter().map(|x| x - h).collect();
        let (fp, fm) = (direct::evaluate(&v, &plus), direct::evaluate(&v, &minus));
        let exact = direct::evaluate(&d, &xs);
        for i in 0..xs.len() {
            let fd = (fp.component(0)[i] - fm.component(0)[i]) / (2.0 * h);
            prop_assert!((fd - exact.component(0)[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn mode_h1_norm_is_eigenvalue_weight() {
    for k in 1..6 {
        let v = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 8, 0, k).unwrap();
        assert_relative_eq!(v.l2_norm(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(v.h1_norm_sq(), 1.0 + (k * k) as f64, max_relative = 1e-14);
    }
}

#[test]
fn cosine_mode_derivative_is_scaled_sine() {
    let l = 3.0;
    let c = SpectralField::mode(BasisKind::NeumannCosine, l, 1, 8, 0, 1).unwrap();
    let s = SpectralField::mode(BasisKind::DirichletSine, l, 1, 8, 0, 1).unwrap();
    let d = c.derivative();
    assert!(d.sub(&s.scale(-PI / l)).unwrap().l2_norm() < 1e-15);
    let back = s.derivative();
    assert!(back.sub(&c.scale(PI / l)).unwrap().l2_norm() < 1e-15);
}

#[test]
fn constant_neumann_mode_has_zero_eigenvalue() {
    assert_eq!(eigenvalue(0, 2.0, BasisKind::NeumannCosine).unwrap(), 0.0);
    assert!(eigenvalue(0, 2.0, BasisKind::DirichletSine).is_err());
    assert_relative_eq!(eigenvalue::<f64>(3, PI, BasisKind::DirichletSine).unwrap(), 9.0, max_relative = 1e-15);
}

#[test]
fn sup_norm_of_a_sine_mode() {
    let grid = Grid::new(32, PI).unwrap();
    let v = SpectralField::mode(BasisKind::DirichletSine, PI, 1, 32, 0, 1).unwrap();
    assert_relative_eq!(grid.sup_norm(&v, 4), (2.0 / PI).sqrt(), max_relative = 1e-6);
}
