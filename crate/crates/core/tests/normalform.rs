use std::time::Instant;

use bumpy_core::flow::{flow_map, FlowConfig};
use bumpy_core::geometry::{fd_gradient, fd_hessian, Hamiltonian, PhasePoint};
use bumpy_core::normalform::*;
use bumpy_core::zoo;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn pt(x: &[f64]) -> PhasePoint {
    PhasePoint::from_slice(x).unwrap()
}

fn build(h: &dyn Hamiltonian, x0: &PhasePoint, delta: f64) -> NormalFormData {
    build_normal_form(h, x0, delta, &NormalFormConfig::default()).unwrap()
}

fn assert_normal_form(name: &str, nf: &NormalFormData) {
    println!("{name}: delta {} halvings {} residuals {:?}", nf.delta, nf.halvings, nf.residuals);
    println!(
        "{name}: congruence {:e} asymmetry {:e}",
        nf.congruence_residual, nf.b_asymmetry
    );
    assert!(nf.residuals.passes(1e-6), "{name}: {:?}", nf.residuals);
    assert!(nf.congruence_residual <= 1e-8, "{name}: {:e}", nf.congruence_residual);
    assert!(nf.b_asymmetry <= 1e-10, "{name}: {:e}", nf.b_asymmetry);
    for t in [-nf.delta, 0.0, 0.5 * nf.delta] {
        let k = nf.k.value(t);
        assert!((&k - k.transpose()).amax() <= 1e-10, "{name}: K not symmetric");
    }
}

/// `(t e_1, 0)` plus a perturbation of size `r`.
fn tube_point(n: usize, t: f64, dir: &[f64], r: f64) -> DVector<f64> {
    let mut x = segment_point(n, t);
    for (i, v) in dir.iter().enumerate() {
        x[i] += r * v;
    }
    x
}

#[test]
fn harmonic_orbit_normal_form() {
    let z = zoo::harmonic(0.8);
    let start = Instant::now();
    let nf = build(&z.model, &z.x0, 0.5);
    assert_normal_form("harmonic", &nf);
    assert_eq!(nf.signs.as_slice(), &[1.0]);
    // K(t) = omega^2 on the straight orbit.
    assert!((nf.k_at(0.1)[(0, 0)] - 0.64).abs() < 1e-7);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn curved_harmonic_orbit_normal_form() {
    let z = zoo::harmonic(1.3);
    let x0 = pt(&[0.2, 0.35, 0.9, -0.4]);
    let nf = build(&z.model, &x0, 0.4);
    assert_normal_form("curved harmonic", &nf);
    assert_eq!(nf.signs.as_slice(), &[1.0]);
}

#[test]
fn nonconvex_d1_has_negative_sign() {
    let z = zoo::nonconvex_d1();
    let nf = build(&z.model, &z.x0, 0.5);
    assert_normal_form("nonconvex d1", &nf);
    assert_eq!(nf.signs.as_slice(), &[-1.0]);
}

#[test]
fn nonconvex_d2_orders_positive_signs_first() {
    let z = zoo::nonconvex_d2();
    let x0 = pt(&[0.0, 0.1, -0.2, 1.0, 0.3, 0.1]);
    let nf = build(&z.model, &x0, 0.4);
    assert_normal_form("nonconvex d2", &nf);
    assert_eq!(nf.signs.as_slice(), &[1.0, -1.0]);
}

#[test]
fn natural_libration_normal_form() {
    let z = zoo::pendulum_well(2, 1.5, 0.3, 1.0);
    // Move off the turning point, where the projected velocity vanishes.
    let x = flow_map(&z.model, &z.x0.to_vector(), 0.25 * z.period, &FlowConfig::default()).unwrap();
    let nf = build(&z.model, &PhasePoint::from_vector(&x).unwrap(), 0.5);
    assert_normal_form("pendulum well", &nf);
    assert_eq!(nf.signs.as_slice(), &[1.0, 1.0]);
}

#[test]
fn natural_system_off_axis_normal_form() {
    let z = zoo::pendulum_well(2, 1.5, 0.3, 1.0);
    let x0 = pt(&[0.3, 0.15, 0.1, 0.8, 0.2, -0.1]);
    let nf = build(&z.model, &x0, 0.5);
    assert_normal_form("pendulum well off axis", &nf);
    assert_eq!(nf.signs.as_slice(), &[1.0, 1.0]);
}

#[test]
fn turning_point_is_a_hypothesis_violation() {
    let z = zoo::pendulum_well(1, 1.0, 0.0, 1.0);
    let err = build_normal_form(&z.model, &z.x0, 0.5, &NormalFormConfig::default()).unwrap_err();
    assert!(matches!(err, bumpy_core::Error::HypothesisViolation { .. }), "{err}");
}

#[test]
fn degenerate_bordered_test_is_rejected() {
    // Null covector of the indefinite kinetic form: the bordered determinant vanishes.
    let z = zoo::lorentz_torus();
    let err = build_normal_form(&z.model, &z.x0, 0.5, &NormalFormConfig::default()).unwrap_err();
    assert!(matches!(err, bumpy_core::Error::HypothesisViolation { .. }), "{err}");
}

#[test]
fn identity_chart_reports_residuals_without_failing() {
    let z = zoo::harmonic(0.8);
    let chart = FiberedChart::identity(2, z.model.domain());
    let hc = chart.pullback(&z.model);
    let r = verify_normal_form(&hc, 0.3, &DVector::from_vec(vec![1.0]), 20, &FlowConfig::default());
    // The origin is an equilibrium, so the orbit residual is the segment length.
    assert!((r.orbit - 0.3).abs() < 1e-9, "{r:?}");
    assert!(r.max() > 1e-3);
}

#[test]
fn chart_derivatives_match_finite_differences() {
    let z = zoo::harmonic(1.3);
    let x0 = pt(&[0.2, 0.35, 0.9, -0.4]);
    let nf = build(&z.model, &x0, 0.4);
    let hc = nf.chart_hamiltonian(&z.model);
    let x = tube_point(2, 0.13, &[0.3, -0.5, 0.7, 0.2], 0.05);
    let g = hc.gradient(&x);
    let g_fd = fd_gradient(|y| hc.value(y), &x, 1e-5);
    assert!((&g - &g_fd).amax() < 1e-7, "{}", (&g - &g_fd).amax());
    let hs = hc.hessian(&x);
    let h_fd = fd_hessian(|y| hc.value(y), &x, 1e-4);
    assert!((&hs - &h_fd).amax() < 1e-5, "{}", (&hs - &h_fd).amax());
    let h_fd2 = DMatrix::from_fn(4, 4, |i, j| {
        let mut e = DVector::zeros(4);
        e[j] = 1e-6;
        (hc.gradient(&(&x + &e))[i] - hc.gradient(&(&x - &e))[i]) / 2e-6
    });
    assert!((&hs - &h_fd2).amax() < 1e-6, "{}", (&hs - &h_fd2).amax());
}

#[test]
fn chart_is_symplectic_and_invertible_in_the_tube() {
    let z = zoo::nonconvex_d2();
    let x0 = pt(&[0.0, 0.1, -0.2, 1.0, 0.3, 0.1]);
    let nf = build(&z.model, &x0, 0.4);
    let mut runner = proptest::test_runner::TestRunner::default();
    let delta = nf.delta;
    runner
        .run(
            &(-delta..delta, proptest::collection::vec(-1.0..1.0f64, 6)),
            |(t, dir)| {
                let x = tube_point(3, t, &dir, 0.05 * delta);
                prop_assert!(nf.chart.symplectic_residual(&x) <= 1e-8);
                let y = nf.chart.apply(&x);
                let back = nf.chart.inverse(&y).unwrap();
                prop_assert!((back - &x).amax() <= 1e-9);
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn straightening_a_diagonal_line_is_a_rotation() {
    let z = zoo::free_particle(1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x0 = pt(&[0.0, 0.0, s, s]);
    let piece = straighten_projection(&z.model, &x0, 0.5).unwrap();
    let ChartPiece::Homogeneous(map) = piece.piece else { panic!("expected a base map") };
    for t in [-0.4, 0.0, 0.3] {
        let jet = map.jet(&DVector::from_vec(vec![t, 0.2]));
        let f = &jet.f;
        assert!((f.transpose() * f - DMatrix::identity(2, 2)).amax() <= 1e-10);
        let q = map.apply(&DVector::from_vec(vec![t, 0.0]));
        assert!((q - DVector::from_vec(vec![s * t, s * t])).amax() <= 1e-10);
    }
}

/// `H = p_1 + (1 + q_1) p_2^2 / 2 - p_3^2 / 2`, already straight with
/// `A(t) = diag(1 + t, -1)`.
struct DiagonalModel;

impl Hamiltonian for DiagonalModel {
    fn base_dim(&self) -> usize {
        3
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x[3] + 0.5 * (1.0 + x[0]) * x[4] * x[4] - 0.5 * x[5] * x[5]
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.5 * x[4] * x[4], 0.0, 0.0, 1.0, (1.0 + x[0]) * x[4], -x[5]])
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(6, 6);
        h[(0, 4)] = x[4];
        h[(4, 0)] = x[4];
        h[(4, 4)] = 1.0 + x[0];
        h[(5, 5)] = -1.0;
        h
    }
}

#[test]
fn diagonalization_matches_closed_form() {
    let h = DiagonalModel;
    let diag = diagonalize_vertical_hessian(&h, 0.4).unwrap();
    assert_eq!(diag.signs.as_slice(), &[1.0, -1.0]);
    assert!(diag.congruence_residual <= 1e-8);
    assert!(diag.b_asymmetry <= 1e-10);
    let ChartPiece::Homogeneous(m) = &diag.matrix_piece else { panic!() };
    for t in [-0.4f64, -0.1, 0.25, 0.4] {
        let y = m.apply(&DVector::from_vec(vec![t, 1.0, 1.0]));
        assert!((y[1] - (1.0 + t).sqrt()).abs() <= 1e-8, "{t}: {}", y[1]);
        assert!((y[2] - 1.0).abs() <= 1e-8);
    }
    let mut chart = FiberedChart::identity(3, h.domain());
    chart.push_inner(diag.matrix_piece.clone());
    chart.push_inner(diag.quadratic_piece.clone());
    let r = verify_normal_form(&chart.pullback(&h), 0.4, &diag.signs, 20, &FlowConfig::default());
    assert!(r.passes(1e-7), "{r:?}");
}

#[test]
fn shear_removes_mixed_fiber_term() {
    /// `H = p_1^2/2 + p_1 p_2 + p_2^2/2 + p_1/2`, straight with `l = 1`.
    struct Mixed;
    impl Hamiltonian for Mixed {
        fn base_dim(&self) -> usize {
            2
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            0.5 * x[2] * x[2] + x[2] * x[3] + 0.5 * x[3] * x[3] + x[2]
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![0.0, 0.0, x[2] + x[3] + 1.0, x[2] + x[3]])
        }
        fn hessian(&self, _: &DVector<f64>) -> DMatrix<f64> {
            let mut h = DMatrix::zeros(4, 4);
            h.view_mut((2, 2), (2, 2)).fill(1.0);
            h
        }
    }
    let piece = shear_normalization(&Mixed, 0.5).unwrap();
    let ChartPiece::Homogeneous(map) = &piece else { panic!() };
    let y = map.apply(&DVector::from_vec(vec![0.1, 1.0]));
    assert!((y[0] - 1.1).abs() <= 1e-12);
    let mut chart = FiberedChart::identity(2, Mixed.domain());
    chart.push_inner(piece);
    let hs = chart.pullback(&Mixed).hessian(&segment_point(2, 0.2));
    assert!(hs[(2, 3)].abs() <= 1e-8, "{}", hs[(2, 3)]);
    assert!(hs.view((0, 3), (2, 1)).amax() <= 1e-8);
}

#[test]
fn momentum_generator_integrates_the_first_component() {
    use bumpy_core::curves::{Curve, Grid};
    let grid = Grid::new(-0.6, 0.6, 96).unwrap();
    let p = Curve::from_samples(grid, |t| Ok(DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]))).unwrap();
    let ChartPiece::Vertical(g) = vertical_normalization(MomentumCurve::Sampled(p)) else { panic!() };
    for (t, qh) in [(-0.5f64, 0.3), (0.2, -1.0), (0.45, 0.7)] {
        let q = DVector::from_vec(vec![t, qh]);
        let expected = t.sin() + t.sin() * qh;
        assert!((g.value(&q) - expected).abs() <= 1e-8, "{t}");
        let jet = g.jet(&q, &DVector::zeros(2));
        assert!((jet.dg[0] - (t.cos() + t.cos() * qh)).abs() <= 1e-8);
        assert!((jet.dg[1] - t.sin()).abs() <= 1e-8);
    }
}

#[test]
fn vertical_piece_removes_orbit_momentum() {
    let z = zoo::harmonic(1.3);
    let x0 = pt(&[0.2, 0.35, 0.9, -0.4]);
    let straight = straighten_projection(&z.model, &x0, 0.3).unwrap();
    let mut chart = FiberedChart::identity(2, z.model.domain());
    chart.push_inner(straight.piece);
    let x_chart = chart.inverse(&x0.to_vector()).unwrap();
    let sampled = chart_momentum(&chart.pullback(&z.model), &x_chart, 0.3).unwrap();
    for t in [-0.3, 0.1, 0.25] {
        let a = straight.momentum.derivatives(t)[0].clone();
        let b = sampled.derivatives(t)[0].clone();
        assert!((a - b).amax() <= 1e-8, "{t}");
    }
    chart.push_inner(vertical_normalization(straight.momentum));
    let hc = chart.pullback(&z.model);
    let e = z.model.value(&x0.to_vector());
    for t in [-0.3, -0.05, 0.2, 0.3] {
        let y = bumpy_core::flow::flow_map(&hc, &DVector::zeros(4), t, &FlowConfig::default()).unwrap();
        assert!((y - segment_point(2, t)).amax() <= 1e-8);
        assert!((hc.value(&segment_point(2, t)) - e).abs() <= 1e-10);
    }
}
