use approx::assert_relative_eq;
use imlab_core::manifold::resolvent::{mode_operator_norm, phi_psi, trapezoid_weights, ModeStep};
use imlab_core::manifold::{
    build_manifold, choose_parameters, invariance_residual, perron_solve, spectral_gap_check, Layout, LinearForcing,
    PerronConfig,
};
use imlab_core::spectral::{eigenvalue, BasisKind};
use imlab_core::{Block, SpectralField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const PI: f64 = std::f64::consts::PI;

fn linear(modes: usize, matrix: Vec<f64>) -> LinearForcing<f64> {
    LinearForcing {
        template: Block::single(SpectralField::zeros(BasisKind::DirichletSine, PI, 1, modes)),
        matrix,
        shifts: vec![0.0],
    }
}

#[test]
fn forward_step_is_exact_for_constant_forcing() {
    let (nu, dt, n) = (3.0, 0.01, 401);
    let step = ModeStep::new(nu, dt).unwrap();
    let mut y = vec![0.0; n];
    step.apply(&vec![1.0; n], &mut y);
    for (j, v) in y.iter().enumerate() {
        let s = j as f64 * dt;
        assert!((v - (1.0 - (-nu * s).exp()) / nu).abs() < 1e-13);
    }
}

#[test]
fn backward_step_is_exact_for_linear_forcing() {
    // ŷ' = −ν ŷ + t on t ≤ 0 with ŷ(0) = 0 and ν < 0
    let (nu, dt, n) = (-2.0, 0.01, 301);
    let step = ModeStep::new(nu, dt).unwrap();
    let t: Vec<f64> = (0..n).map(|j| -dt * (n - 1 - j) as f64).collect();
    let mut y = vec![0.0; n];
    step.apply(&t, &mut y);
    let exact = |t: f64| t / nu - 1.0 / (nu * nu) + (-nu * t).exp() / (nu * nu);
    for (tj, v) in t.iter().zip(&y) {
        assert!((v - exact(*tj)).abs() < 1e-12, "{tj}: {v} vs {}", exact(*tj));
    }
}

#[test]
fn eigenvalue_mode_is_a_configuration_error() {
    assert!(ModeStep::new(0.0, 0.01).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transpose_is_adjoint(
        nu in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        h in prop::collection::vec(-1.0f64..1.0, 20),
        g in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let step = ModeStep::new(nu, 0.05).unwrap();
        let (mut rh, mut rtg) = (vec![0.0; 20], vec![0.0; 20]);
        step.apply(&h, &mut rh);
        step.apply_transpose(&g, &mut rtg);
        let lhs: f64 = rh.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = h.iter().zip(&rtg).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn phi_psi_is_continuous_across_the_series_switch(x in 0.0095f64..0.0105) {
        let (p, q) = phi_psi(x);
        let e = (-x).exp();
        prop_assert!((p - (1.0 - e) / x).abs() < 1e-12);
        prop_assert!((q - (1.0 - e * (1.0 + x)) / (x * x)).abs() < 1e-8);
    }

    #[test]
    fn gap_check_agrees_with_its_conditions(
        n in 1usize..20,
        l1 in 0.0f64..2.0,
        l2 in 0.0f64..10.0,
    ) {
        let r = spectral_gap_check(n, PI, 8, l1, l2);
        prop_assert_eq!(r.gap, (2 * n + 1) as f64);
        prop_assert_eq!(r.pass, r.cond1_lhs > 4.0 * l1 && r.cond2_lhs > 4.0 * l2);
        let bigger = spectral_gap_check(n, PI, 8, 2.0 * l1, 2.0 * l2);
        prop_assert!(bigger.budget >= r.budget);
        prop_assert!(!bigger.pass || r.pass);
    }
}

#[test]
fn resolvent_norm_approaches_inverse_rate() {
    for nu in [-4.0, -1.0, 0.5, 3.0] {
        let dt = 1e-3;
        let step = ModeStep::new(nu, dt).unwrap();
        let nodes = (25.0 / (nu as f64).abs() / dt) as usize;
        let r = mode_operator_norm(&step, nodes, dt, 60);
        assert!(r <= 1.0 / nu.abs() * (1.0 + 1e-6), "ν = {nu}: {r}");
        assert!(r >= 0.95 / nu.abs(), "ν = {nu}: {r}");
    }
    let w = trapezoid_weights(5, 0.1);
    assert_relative_eq!(w.iter().sum::<f64>(), 0.4, max_relative = 1e-15);
}

#[test]
fn zero_lipschitz_constants_pick_the_first_level() {
    let c = choose_parameters(PI, 64, 8, |_| Ok((0.0, 0.0))).unwrap();
    assert_eq!((c.k, c.n), (8, 1));
    assert_eq!(c.config.theta, 2.5);
    let err = choose_parameters(PI, 64, 8, |_| Ok((1.0, 0.0)));
    assert!(err.is_err());
}

#[test]
fn decoupled_linear_forcing_gives_the_zero_graph() {
    let s = 5;
    let mut b = vec![0.0; s * s];
    for k in 0..s {
        b[k * s + k] = 0.3 * (k as f64 - 2.0);
    }
    let f = linear(s, b);
    let pc = PerronConfig::dirichlet(2, s, PI, 0.0).unwrap();
    let layout = Layout::new(&f);
    let sol = perron_solve(&f, &layout.from_low_coords(&[0.7, -0.4], pc.theta), &pc).unwrap();
    assert!(layout.flatten(&sol.image).iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn linear_graph_matches_the_slow_eigenspace() {
    let (s, n) = (5, 2);
    let b: Vec<f64> = (0..s * s).map(|i| 0.2 * ((i * 7 % 11) as f64 / 10.0 - 0.5)).collect();
    let f = linear(s, b.clone());
    let mut pc = PerronConfig::dirichlet(n, s, PI, 0.0).unwrap();
    pc.dt = 2e-4;
    let layout = Layout::new(&f);

    let mut l = DMatrix::from_row_slice(s, s, &b);
    for k in 0..s {
        l[(k, k)] -= eigenvalue(k + 1, PI, BasisKind::DirichletSine).unwrap();
    }
    let eig = l.clone().complex_eigenvalues();
    let mut ev: Vec<f64> = eig.iter().map(|c| c.re).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let cols: Vec<DVector<f64>> = ev[..n]
        .iter()
        .map(|&lam| {
            let shifted = &l - DMatrix::identity(s, s) * lam;
            let svd = shifted.svd(false, true);
            svd.v_t.unwrap().row(svd.singular_values.imin()).transpose()
        })
        .collect();
    let basis = DMatrix::from_columns(&cols);
    let g = basis.rows(n, s - n) * basis.rows(0, n).try_inverse().unwrap();

    let p = [0.5, -0.8];
    let img = layout.flatten(&perron_solve(&f, &layout.from_low_coords(&p, pc.theta), &pc).unwrap().image);
    let want = &g * DVector::from_column_slice(&p);
    for i in 0..s - n {
        assert!((img[n + i] - want[i]).abs() < 1e-7, "{} vs {}", img[n + i], want[i]);
    }

    let base = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5], vec![0.4, -0.3], vec![-0.3, -0.2]];
    let graph = build_manifold(&f, &base, &pc).unwrap();
    let inv = invariance_residual(&f, &graph, &pc, pc.dt).unwrap();
    assert!(inv.max_relative < 1e-6, "{}", inv.max_relative);
}

#[test]
fn zero_forcing_gives_zero_residual() {
    let f = linear(4, vec![0.0; 16]);
    let pc = PerronConfig::dirichlet(1, 4, PI, 0.0).unwrap();
    let graph = build_manifold(&f, &[vec![0.0], vec![1.0], vec![-0.5]], &pc).unwrap();
    assert!(graph.images.iter().flatten().all(|x| *x == 0.0));
    let inv = invariance_residual(&f, &graph, &pc, 1e-3).unwrap();
    assert!(inv.max_relative < 1e-15);
}
