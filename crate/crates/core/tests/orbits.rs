use std::f64::consts::PI;
use std::sync::Arc;

use bumpy_core::flow::{integrate_flow, FlowConfig};
use bumpy_core::geometry::{FnPotential, Hamiltonian, PhasePoint, PotentialField, QuadraticPotential};
use bumpy_core::linalg::{symplectic_residual, SympMatrix};
use bumpy_core::orbits::*;
use bumpy_core::zoo;
use nalgebra::{DMatrix, DVector};

fn pt(x: &[f64]) -> PhasePoint {
    PhasePoint::from_slice(x).unwrap()
}

/// `u = b(q1) q2^2 / 2` with `b` a trigonometric polynomial: zero value and
/// differential on the `q1` axis.
fn axis_potential(c: [f64; 3]) -> FnPotential {
    let b = move |t: f64| c[0] + c[1] * t.cos() + c[2] * (2.0 * t).sin();
    let db = move |t: f64| -c[1] * t.sin() + 2.0 * c[2] * (2.0 * t).cos();
    let d2b = move |t: f64| -c[1] * t.cos() - 4.0 * c[2] * (2.0 * t).sin();
    FnPotential::new(
        2,
        "axis",
        move |q| 0.5 * b(q[0]) * q[1] * q[1],
        move |q| DVector::from_vec(vec![0.5 * db(q[0]) * q[1] * q[1], b(q[0]) * q[1]]),
        move |q| {
            DMatrix::from_row_slice(
                2,
                2,
                &[0.5 * d2b(q[0]) * q[1] * q[1], db(q[0]) * q[1], db(q[0]) * q[1], b(q[0])],
            )
        },
    )
}

#[test]
fn shooting_finds_harmonic_orbit() {
    let z = zoo::harmonic(0.7);
    let cfg = ShootingConfig {
        energy: EnergyPin::Value(0.5),
        ..ShootingConfig::default()
    };
    let orbit = find_periodic_orbit(&z.model, &pt(&[0.0, 0.01, 1.0, -0.01]), 6.1, &cfg).unwrap();
    assert!((orbit.period - 2.0 * PI).abs() < 1e-8, "{}", orbit.period);
    assert!(orbit.closure_residual < 1e-9);
    assert_eq!(orbit.multiplicity, 1);
    let hist = &orbit.diagnostics.as_ref().unwrap().residual_history;
    assert!(hist.len() <= 8, "{hist:?}");
}

#[test]
fn shooting_momentum_linear_converges_immediately() {
    let z = zoo::momentum_linear(2);
    let x = pt(&[0.3, 0.5, -0.2, 1.0, 0.1, 0.4]);
    let orbit = find_periodic_orbit(&z.model, &x, 2.0 * PI, &ShootingConfig::default()).unwrap();
    assert!((orbit.period - 2.0 * PI).abs() < 1e-12);
    assert!(orbit.diagnostics.unwrap().iterations <= 1);
}

#[test]
fn shooting_finds_libration_with_quadrature_period() {
    let z = zoo::pendulum_well(1, 2.0, 0.5, 1.0);
    let guess = pt(&[1.01, 0.002, 0.0, 0.001]);
    let orbit = find_periodic_orbit(&z.model, &guess, z.period + 0.05, &ShootingConfig::default()).unwrap();
    assert!(orbit.x0.q()[1].abs() < 1e-9 && orbit.x0.p()[1].abs() < 1e-9);
    // On the axis the energy is 1 - cos A at the turning point.
    let a = (1.0 - orbit.energy).acos();
    assert!((orbit.period - zoo::pendulum_period(a)).abs() < 1e-8);
}

#[test]
fn shooting_failure_reports_history() {
    let z = zoo::pendulum_well(1, 2.0, 0.5, 1.0);
    let cfg = ShootingConfig {
        max_iter: 1,
        ..ShootingConfig::default()
    };
    let err = find_periodic_orbit(&z.model, &pt(&[1.3, 0.2, 0.0, 0.1]), 9.0, &cfg).unwrap_err();
    match err {
        bumpy_core::Error::NoConvergence { history, .. } => assert!(!history.is_empty()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn minimal_period_detects_multiplicity() {
    let z = zoo::harmonic(0.7);
    let cfg = FlowConfig::default();
    let simple = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
    let mp = minimal_period(&z.model, &simple, 1e-8, 12).unwrap();
    assert_eq!(mp.multiplicity, 1);
    let doubled = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 4.0 * PI, &cfg).unwrap();
    let mp = minimal_period(&z.model, &doubled, 1e-8, 12).unwrap();
    assert_eq!(mp.multiplicity, 2);
    assert!((mp.t_min - 2.0 * PI).abs() < 1e-8);
}

#[test]
fn neat_times_of_reference_orbits() {
    let cfg = FlowConfig::default();
    let z = zoo::harmonic(0.7);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
    let nt = neat_times(&z.model, &orbit, &NeatConfig::default());
    assert!(nt.all);

    let z = zoo::pendulum_well(1, 2.0, 0.5, 1.0);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    let nt = neat_times(&z.model, &orbit, &NeatConfig::default());
    assert!(nt.is_empty(), "{:?}", nt.intervals);
}

#[test]
fn figure_eight_excludes_the_crossing() {
    let cfg = FlowConfig::default();
    let z = zoo::figure_eight();
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
    let nc = NeatConfig::default();
    let nt = neat_times(&z.model, &orbit, &nc);
    assert!(!nt.all);
    assert_eq!(nt.intervals.len(), 2, "{:?}", nt.intervals);
    assert!(!nt.contains(0.0) && !nt.contains(PI));
    assert!(nt.contains(PI / 2.0) && nt.contains(1.5 * PI));

    // Brute-force oracle on the closed form Q(t) = (sin t, sin 2t / 2).
    let q = |t: f64| (t.sin(), 0.5 * (2.0 * t).sin());
    let m = 4000;
    for i in 0..200 {
        let s = 2.0 * PI * (i as f64 + 0.5) / 200.0;
        let (x, y) = q(s);
        let mut min = f64::INFINITY;
        for j in 0..m {
            let t = 2.0 * PI * j as f64 / m as f64;
            let dt = ((t - s + PI).rem_euclid(2.0 * PI) - PI).abs();
            if dt > 1.0 {
                let (a, b) = q(t);
                min = min.min(((a - x).powi(2) + (b - y).powi(2)).sqrt());
            }
        }
        if min > 5.0 * nt.tol_sep {
            assert!(nt.contains(s), "s = {s}");
        }
        if min < 0.2 * nt.tol_sep {
            assert!(!nt.contains(s), "s = {s}");
        }
    }
}

#[test]
fn harmonic_return_map_is_rotation_by_two_pi_omega() {
    let cfg = FlowConfig::default();
    for &omega in &[1.0, 0.3187, 0.77] {
        let z = zoo::harmonic(omega);
        let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
        let frame = SectionFrame::at_time(&z.model, &orbit, 0.0).unwrap();
        let (ann, gram) = frame.residuals(&z.model);
        assert!(ann < 1e-12 && gram < 1e-10);
        let l = restricted_return_map(&z.model, &orbit, &frame, None).unwrap();
        let m = l.matrix();
        let c = (2.0 * PI * omega).cos();
        let s = (2.0 * PI * omega).sin();
        let want = DMatrix::from_row_slice(2, 2, &[c, s / omega, -omega * s, c]);
        assert!((m - want).amax() < 1e-7, "omega {omega}: {m}");
        assert!((m.trace() - 2.0 * c).abs() < 1e-7);
    }
}

#[test]
fn nondegeneracy_verdicts() {
    let v = orbit_nondegenerate(&SympMatrix::identity(1), 1e-8);
    assert!(!v.verdict && v.distance_to_1 == 0.0);
    let w = 0.3187f64;
    let (c, s) = ((2.0 * PI * w).cos(), (2.0 * PI * w).sin());
    let rot = SympMatrix::new(DMatrix::from_row_slice(2, 2, &[c, s, -s, c]), 1e-12).unwrap();
    let v = orbit_nondegenerate(&rot, 1e-8);
    let want = ((c - 1.0).powi(2) + s * s).sqrt();
    assert!(v.verdict && (v.distance_to_1 - want).abs() < 1e-12);
    let shear = SympMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), 1e-12).unwrap();
    assert!(!orbit_nondegenerate(&shear, 1e-6).verdict);
}

#[test]
fn momentum_linear_first_block_row_is_identity_zero() {
    let z = zoo::momentum_linear(1);
    let cfg = FlowConfig::default();
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
    let frame = SectionFrame::at_time(&z.model, &orbit, 0.0).unwrap();
    let u = axis_potential([0.4, -0.3, 0.2]);
    let l = restricted_return_map(&z.model, &orbit, &frame, Some(&u)).unwrap();
    let m = l.matrix();
    assert!((m[(0, 0)] - 1.0).abs() < 1e-8 && m[(0, 1)].abs() < 1e-8);
    // The lower-left entry is minus the integral of b over the circle.
    assert!((m[(1, 0)] + 0.4 * 2.0 * PI).abs() < 1e-7);
}

#[test]
fn libration_return_map_is_reversible() {
    let z = zoo::pendulum_well(1, 2.0, 0.5, 1.0);
    let cfg = FlowConfig::default();
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    let mut normal = DVector::zeros(4);
    normal[2] = 1.0;
    let frame = SectionFrame::with_normal(&z.model, &orbit, 0.0, normal).unwrap();
    let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    for c in [[0.0, 0.0, 0.0], [0.5, 0.2, -0.3], [-0.4, 0.6, 0.1]] {
        let u = axis_potential(c);
        let l = restricted_return_map(&z.model, &orbit, &frame, Some(&u as &dyn PotentialField)).unwrap();
        let m = l.matrix();
        assert!((&r - m * &r * m).amax() < 1e-6, "{m}");
    }
}

#[test]
fn return_map_is_conjugation_invariant_and_symplectic() {
    let cfg = FlowConfig::default();
    let z = zoo::nonconvex_d2();
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    let mut spectra = Vec::new();
    for &t0 in &[0.0, 1.3, 4.0] {
        let frame = SectionFrame::at_time(&z.model, &orbit, t0).unwrap();
        let l = restricted_return_map(&z.model, &orbit, &frame, None).unwrap();
        assert!(symplectic_residual(l.matrix()) < 1e-6);
        let mut ev: Vec<(f64, f64)> = bumpy_core::linalg::eigenvalues(l.matrix());
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        spectra.push(ev);
    }
    for s in &spectra[1..] {
        for (a, b) in s.iter().zip(&spectra[0]) {
            let rel = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() / (1.0 + b.0.abs());
            assert!(rel < 1e-6, "{s:?} vs {:?}", spectra[0]);
        }
    }
}

#[test]
fn tangent_section_is_rejected() {
    let z = zoo::harmonic(1.0);
    let cfg = FlowConfig::default();
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
    let mut normal = DVector::zeros(4);
    normal[1] = 1.0;
    let err = SectionFrame::with_normal(&z.model, &orbit, 0.0, normal).unwrap_err();
    assert!(matches!(err, bumpy_core::Error::Tangency { .. }));
}

#[test]
fn admissible_potential_keeps_the_orbit() {
    let z = zoo::harmonic(0.7);
    let u = axis_potential([0.3, 0.2, -0.1]);
    let hu = z.model.add_potential(Arc::new(u)).unwrap();
    let orbit = find_periodic_orbit(&hu, &z.x0, 2.0 * PI, &ShootingConfig::default()).unwrap();
    assert!((orbit.x0.to_vector() - z.x0.to_vector()).amax() < 1e-9);
    assert!((orbit.period - 2.0 * PI).abs() < 1e-9);
}

#[test]
fn sigma_scan_examples() {
    let cfg = FlowConfig::default();
    // Convex: no zeros while d_p H != 0.
    let z = zoo::pendulum_rotation(1, 1.0, 2.5);
    let tr = integrate_flow(&z.model, &z.x0, [0.0, 10.0], &cfg).unwrap();
    assert!(sigma_scan(&z.model, &tr, None).is_empty());
    // Non-convex with a potential: det = 1 along the orbit.
    let z = zoo::nonconvex_d1();
    let tr = integrate_flow(&z.model, &z.x0, [0.0, 2.0 * PI], &cfg).unwrap();
    assert!(sigma_scan(&z.model, &tr, None).is_empty());
}

#[test]
fn sigma_crossings_match_zero_energy_times() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let h = zoo::lorentz_torus().model;
    // Drive the trajectory with a linear potential so that H varies along it.
    let drive = QuadraticPotential::new(0.0, DVector::from_vec(vec![0.4, -0.1]), DMatrix::zeros(2, 2));
    let driven = h.add_potential(Arc::new(drive)).unwrap();
    let _ = &mut rng;
    let x0 = pt(&[0.0, 0.0, 1.0, 0.8]);
    let tr = integrate_flow(&driven, &x0, [0.0, 8.0], &FlowConfig::default()).unwrap();
    let events = sigma_scan(&h, &tr, None);
    let energy = |t: f64| h.value(&tr.state(t));
    let mut roots = Vec::new();
    let n = 4000;
    for i in 0..n {
        let (a, b) = (8.0 * i as f64 / n as f64, 8.0 * (i + 1) as f64 / n as f64);
        if energy(a).signum() != energy(b).signum() {
            roots.push(bumpy_core::roots::illinois(energy, a, b, energy(a), energy(b), 1e-15, 1e-15));
        }
    }
    assert!(!roots.is_empty());
    assert_eq!(events.len(), roots.len());
    for (e, r) in events.iter().zip(&roots) {
        assert_eq!(e.kind, SigmaEventKind::SignChange);
        assert!(e.det_lo * e.det_hi <= 0.0);
        assert!((e.t() - r).abs() < 1e-8);
    }
}

#[test]
fn classification_of_reference_orbits() {
    let cfg = FlowConfig::default();
    let z = zoo::harmonic(0.3187);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), 2.0 * PI, &cfg).unwrap();
    let c = classify_orbit(&z.model, &orbit);
    assert!(c.perturbable && c.joint_all);
    assert!(c.nondegeneracy.unwrap().verdict);

    let z = zoo::pendulum_well(1, 2.0, 0.5, 1.0);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    let c = classify_orbit(&z.model, &orbit);
    assert!(!c.perturbable && c.neat.is_empty());

    let z = zoo::lorentz_torus();
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &cfg).unwrap();
    let c = classify_orbit(&z.model, &orbit);
    assert!(c.neat.all, "the null geodesic is embedded");
    assert!(!c.perturbable);
    assert!(!c.sigma_events.is_empty());
}
