use std::sync::Arc;

use bumpy_core::control::{ControlBasis, ControlCurve};
use bumpy_core::error::Error;
use bumpy_core::flow::{flow_map, FlowConfig};
use bumpy_core::geometry::{ChartDomain, Hamiltonian, PotentialField};
use bumpy_core::normalform::*;
use bumpy_core::orbits::PeriodicOrbit;
use bumpy_core::potentials::*;
use bumpy_core::zoo;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `phi(q) = R q + c` with `R` a plane rotation in the first two coordinates.
#[derive(Debug)]
struct Rigid {
    r: DMatrix<f64>,
    c: DVector<f64>,
}

impl Rigid {
    fn new(n: usize, angle: f64, c: &[f64]) -> Self {
        let mut r = DMatrix::identity(n, n);
        r[(0, 0)] = angle.cos();
        r[(0, 1)] = -angle.sin();
        r[(1, 0)] = angle.sin();
        r[(1, 1)] = angle.cos();
        Self {
            r,
            c: DVector::from_column_slice(c),
        }
    }
}

impl BaseMap for Rigid {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn jet(&self, q: &DVector<f64>) -> BaseJet {
        let mut jet = BaseJet::zeros(self.dim());
        jet.value = &self.r * q + &self.c;
        jet.f = self.r.clone();
        jet
    }

    fn describe(&self) -> String {
        "rigid".into()
    }
}

fn curve(d: usize, delta: f64, coeffs: &[f64]) -> ControlCurve {
    let basis = ControlBasis::bumps_on(d, delta, coeffs.len() / (d * (d + 1) / 2)).unwrap();
    ControlCurve::new(basis, DVector::from_column_slice(coeffs)).unwrap()
}

fn chart_with(n: usize, piece: Option<ChartPiece>, delta: f64) -> FiberedChart {
    let mut chart = FiberedChart::identity(n, ChartDomain::euclidean(n));
    if let Some(p) = piece {
        chart.push_inner(p);
    }
    chart.delta = delta;
    chart.radius = delta;
    chart
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_transport_is_the_same_potential(
        c in prop::collection::vec(-1.0..1.0f64, 6),
        q in prop::collection::vec(-0.3..0.8f64, 3),
    ) {
        let u = Arc::new(admissible_from_b(&curve(2, 0.5, &c), 0.2).unwrap());
        let t = transport_potential(u.clone(), &chart_with(3, None, 1.0)).unwrap();
        let q = DVector::from_vec(q);
        prop_assert!((t.value(&q) - u.value(&q)).abs() <= 1e-14);
        prop_assert!((t.gradient(&q) - u.gradient(&q)).amax() <= 1e-13);
        prop_assert!((t.hessian(&q) - u.hessian(&q)).amax() <= 1e-12);
    }

    #[test]
    fn admissible_potentials_are_linear_in_b(
        c1 in prop::collection::vec(-1.0..1.0f64, 3),
        c2 in prop::collection::vec(-1.0..1.0f64, 3),
        q in prop::collection::vec(-0.1..0.6f64, 3),
    ) {
        let basis = ControlBasis::bumps_on(2, 0.5, 1).unwrap();
        let b1 = ControlCurve::new(basis.clone(), DVector::from_vec(c1.clone())).unwrap();
        let b2 = ControlCurve::new(basis.clone(), DVector::from_vec(c2.clone())).unwrap();
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let b12 = ControlCurve::new(basis, DVector::from_vec(sum)).unwrap();
        let q = DVector::from_vec(q);
        let [u1, u2, u12] = [b1, b2, b12].map(|b| admissible_from_b(&b, 0.3).unwrap());
        prop_assert!((u12.value(&q) - u1.value(&q) - u2.value(&q)).abs() <= 1e-13);
        prop_assert!((u12.hessian(&q) - u1.hessian(&q) - u2.hessian(&q)).amax() <= 1e-11);
    }

    #[test]
    fn admissibility_holds_on_the_axis(c in prop::collection::vec(-2.0..2.0f64, 4), t in 0.0..0.5f64) {
        let u = admissible_from_b(&curve(1, 0.5, &c), 0.1).unwrap();
        let q = DVector::from_vec(vec![t, 0.0]);
        prop_assert_eq!(u.value(&q), 0.0);
        prop_assert_eq!(u.gradient(&q).amax(), 0.0);
        prop_assert!((u.hessian(&q)[(1, 1)] - u.b().value(t)[(0, 0)]).abs() <= 1e-10);
    }
}

#[test]
fn rotated_chart_moves_the_support() {
    let angle = 0.7;
    let rigid = Rigid::new(2, angle, &[0.3, -0.2]);
    let chart = chart_with(2, Some(ChartPiece::Homogeneous(Arc::new(Rigid::new(2, angle, &[0.3, -0.2])))), 1.0);
    let u = Arc::new(admissible_from_b(&curve(1, 0.5, &[0.5, -1.0, 0.8]), 0.1).unwrap());
    let t = transport_potential(u.clone(), &chart).unwrap();
    for k in 0..200 {
        let s = 0.5 * k as f64 / 199.0;
        let qc = DVector::from_vec(vec![s, 0.0]);
        let q = rigid.apply(&qc);
        assert!(t.value(&q).abs() <= 1e-14);
        assert!(t.gradient(&q).amax() <= 1e-12);
        let expected = &rigid.r * u.hessian(&qc) * rigid.r.transpose();
        assert!((t.hessian(&q) - expected).amax() <= 1e-10);
    }
    // Off the image of the support the potential vanishes even though the
    // chart preimage coordinates would be inside the unrotated support.
    let q = DVector::from_vec(vec![0.25, 0.03]);
    assert_eq!(t.value(&q), 0.0);
    let qc = DVector::from_vec(vec![0.25, 0.03]);
    assert!(u.value(&qc) != 0.0);
    assert!((t.value(&rigid.apply(&qc)) - u.value(&qc)).abs() <= 1e-14);
}

#[test]
fn support_outside_the_chart_is_a_transport_error() {
    let u = Arc::new(admissible_from_b(&curve(1, 0.5, &[1.0, 1.0]), 0.1).unwrap());
    let err = transport_potential(u.clone(), &chart_with(2, None, 0.3)).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
    let u = Arc::new(admissible_from_b(&curve(1, 0.2, &[1.0, 1.0]), 0.5).unwrap());
    assert!(matches!(transport_potential(u, &chart_with(2, None, 0.3)), Err(Error::Transport(_))));
}

fn harmonic_setup() -> (zoo::ZooEntry, NormalFormData, PeriodicOrbit) {
    let z = zoo::harmonic(1.2);
    let x0 = bumpy_core::geometry::PhasePoint::from_slice(&[0.1, 0.3, 0.8, -0.5]).unwrap();
    let nf = build_normal_form(&z.model, &x0, 0.5, &NormalFormConfig::default()).unwrap();
    let orbit = PeriodicOrbit::from_known(&z.model, x0, z.period, &FlowConfig::with_tol(1e-12, 1e-13)).unwrap();
    (z, nf, orbit)
}

#[test]
fn normal_form_transport_stays_admissible_along_the_orbit() {
    let (z, nf, orbit) = harmonic_setup();
    let b = curve(1, nf.delta, &[0.6, -0.4, 0.9]);
    let u = Arc::new(admissible_from_b(&b, 0.25 * nf.delta).unwrap());
    let t = transport_potential(u, &nf.chart).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=100 {
        let s = nf.delta * k as f64 / 100.0;
        let q = orbit.base_point(s);
        worst = worst.max(t.value(&q).abs()).max(t.gradient(&q).amax());
    }
    println!("admissibility residual {worst:e}");
    assert!(worst <= 1e-7);
    // H + u has the same orbit as H.
    let hu = z.model.add_potential(Arc::new(t)).unwrap();
    let cfg = FlowConfig::with_tol(1e-12, 1e-13);
    let x0 = orbit.x0.to_vector();
    for s in [0.5 * nf.delta, nf.delta, 0.5 * orbit.period] {
        let a = flow_map(&hu, &x0, s, &cfg).unwrap();
        let b = flow_map(&z.model, &x0, s, &cfg).unwrap();
        assert!((a - b).amax() <= 1e-8, "{s}");
    }
    assert!((hu.value(&x0) - z.model.value(&x0)).abs() <= 1e-12);
}

#[test]
fn disjoint_support_on_a_simple_orbit() {
    let (_, nf, orbit) = harmonic_setup();
    let b = curve(1, nf.delta, &[1.0, 1.0]);
    let support = b.support().unwrap();
    let window = (0.0, nf.delta);
    let r = default_tube_radius(&orbit, &nf.chart, support, window);
    assert!(r > 0.0);
    let u = transport_potential(Arc::new(admissible_from_b(&b, r).unwrap()), &nf.chart).unwrap();
    assert!(disjoint_support_check(&u, &orbit, window, 1e-3 * r));
}

#[test]
fn disjoint_support_fails_through_a_self_intersection() {
    let z = zoo::figure_eight();
    let cfg = FlowConfig::with_tol(1e-12, 1e-13);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    // Start the chart a little before the crossing at the origin.
    let x0 = bumpy_core::geometry::PhasePoint::from_vector(&orbit.state(-0.2)).unwrap();
    let nf = build_normal_form(&z.model, &x0, 0.4, &NormalFormConfig::default()).unwrap();
    let orbit = PeriodicOrbit::from_known(&z.model, x0, z.period, &cfg).unwrap();
    let b = curve(1, nf.delta, &[1.0, 1.0, 1.0]);
    let window = (0.0, nf.delta);
    let support = b.support().unwrap();
    let small = default_tube_radius(&orbit, &nf.chart, support, window);
    println!("self distance {:e} radius {small:e}", orbit_self_distance(&orbit, support, window));
    let tight = transport_potential(Arc::new(admissible_from_b(&b, small).unwrap()), &nf.chart).unwrap();
    assert!(disjoint_support_check(&tight, &orbit, window, 1e-3 * small));
    let wide = transport_potential(Arc::new(admissible_from_b(&b, 0.9 * nf.delta).unwrap()), &nf.chart).unwrap();
    assert!(!disjoint_support_check(&wide, &orbit, window, 0.0));
}

#[test]
fn libration_tubes_always_meet_the_return_trip() {
    let z = zoo::pendulum_well(1, 1.5, 0.0, 1.0);
    let cfg = FlowConfig::with_tol(1e-12, 1e-13);
    let turning = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    // Anchor at the bottom of the well where the speed is largest.
    let x0 = bumpy_core::geometry::PhasePoint::from_vector(&turning.state(0.25 * z.period)).unwrap();
    let orbit = PeriodicOrbit::from_known(&z.model, x0.clone(), z.period, &cfg).unwrap();
    let nf = build_normal_form(&z.model, &x0, 0.4, &NormalFormConfig::default()).unwrap();
    for (len, coeffs) in [(0.5, vec![1.0]), (1.0, vec![1.0, -1.0, 1.0])] {
        let b = curve(1, len * nf.delta, &coeffs);
        let window = (0.0, len * nf.delta);
        for r in [1e-4, 1e-3, 1e-2, 0.1 * nf.delta] {
            let u = transport_potential(Arc::new(admissible_from_b(&b, r).unwrap()), &nf.chart).unwrap();
            assert!(!disjoint_support_check(&u, &orbit, window, 0.0), "r {r}");
        }
    }
}
