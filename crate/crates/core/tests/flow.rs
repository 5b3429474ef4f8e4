use std::f64::consts::PI;

use bumpy_core::flow::*;
use bumpy_core::geometry::{Hamiltonian, PhasePoint};
use bumpy_core::linalg::symplectic_residual;
use bumpy_core::zoo;
use nalgebra::DVector;

fn pt(x: &[f64]) -> PhasePoint {
    PhasePoint::from_slice(x).unwrap()
}

#[test]
fn momentum_linear_flow_is_translation() {
    let z = zoo::momentum_linear(2);
    let tr = integrate_flow(&z.model, &z.x0, [0.0, 1.0], &FlowConfig::default()).unwrap();
    for &t in &[0.0, 0.25, 0.5, 1.0] {
        let x = tr.state(t);
        assert!((x[0] - t).abs() < 1e-13);
        assert!(x.rows(1, 5).amax() < 1e-13);
    }
    let var = integrate_variational(&z.model, &z.x0, [0.0, 1.0], &FlowConfig::default()).unwrap();
    assert!((var.transition(0.0, 0.7) - nalgebra::DMatrix::identity(6, 6)).amax() < 1e-13);
}

#[test]
fn harmonic_orbit_closes_after_two_pi() {
    let z = zoo::harmonic(1.0);
    let tr = integrate_flow(&z.model, &z.x0, [0.0, 2.0 * PI], &FlowConfig::default()).unwrap();
    let d = z.model.domain().phase_distance(tr.final_state(), &z.x0.to_vector());
    assert!(d < 1e-8, "closure {d:e}");
    assert!((tr.final_state()[0] - 2.0 * PI).abs() < 1e-8);
}

#[test]
fn pendulum_energy_drift_is_small() {
    let z = zoo::pendulum_well(1, 1.0, 0.5, 1.2);
    let mut x = z.x0.to_vector();
    x[1] = 0.1;
    x[3] = 0.05;
    let cfg = FlowConfig::with_tol(1e-10, 1e-12);
    let tr = integrate_flow(&z.model, &pt(x.as_slice()), [0.0, 100.0], &cfg).unwrap();
    assert!(tr.energy_drift() <= 1e-7, "drift {:e}", tr.energy_drift());
}

#[test]
fn harmonic_transverse_block_is_a_rotation() {
    let z = zoo::harmonic(1.0);
    let var = integrate_variational(&z.model, &z.x0, [0.0, 5.0], &FlowConfig::default()).unwrap();
    for &t in &[0.5, 1.7, 3.0, 5.0] {
        let x = var.transition(0.0, t);
        // (q2, p2) are indices 1 and 3.
        let blk = [x[(1, 1)], x[(1, 3)], x[(3, 1)], x[(3, 3)]];
        let want = [t.cos(), t.sin(), -t.sin(), t.cos()];
        for (a, b) in blk.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn transitions_are_symplectic_with_unit_determinant_and_cocycle() {
    let entries = [
        zoo::pendulum_well(2, 1.0, 0.5, 1.0),
        zoo::nonconvex_d2(),
        zoo::figure_eight(),
    ];
    for z in &entries {
        let var = integrate_variational(&z.model, &z.x0, [0.0, 6.0], &FlowConfig::default()).unwrap();
        for &t in &[1.0, 3.0, 6.0] {
            let x = var.transition(0.0, t);
            assert!(symplectic_residual(&x) <= 1e-7 * t, "{}: {:e}", z.name, symplectic_residual(&x));
            assert!((x.determinant() - 1.0).abs() < 1e-7);
        }
        for &(s, t1, t2) in &[(0.0, 1.0, 2.5), (0.5, 3.0, 6.0), (1.2, 1.3, 4.4)] {
            let lhs = var.transition(s, t2);
            let rhs = var.transition(t1, t2) * var.transition(s, t1);
            assert!((lhs - rhs).amax() <= 1e-7, "{}", z.name);
        }
    }
}

#[test]
fn symplecticity_residual_grows_at_most_linearly() {
    let z = zoo::pendulum_well(1, 2.0, 0.3, 1.0);
    let var = integrate_variational(&z.model, &z.x0, [0.0, 40.0], &FlowConfig::default()).unwrap();
    let r10 = symplectic_residual(&var.transition(0.0, 10.0));
    let r40 = symplectic_residual(&var.transition(0.0, 40.0));
    assert!(r40 <= 1e-7 * 40.0);
    assert!(r40 <= 8.0 * r10.max(1e-12), "{r10:e} {r40:e}");
}

#[test]
fn time_reversal_returns_to_start() {
    let z = zoo::pendulum_well(2, 1.0, 0.5, 1.0);
    let cfg = FlowConfig::default();
    let x0 = z.x0.to_vector();
    let xt = flow_map(&z.model, &x0, 7.0, &cfg).unwrap();
    let back = flow_map(&z.model, &xt, -7.0, &cfg).unwrap();
    assert!((back - x0).amax() <= 10.0 * 1e-9);
}

#[test]
fn section_crossings() {
    let z = zoo::momentum_linear(1);
    let tr = integrate_flow(&z.model, &z.x0, [0.0, 1.0], &FlowConfig::default()).unwrap();
    let c = section_crossing(&tr, &|x: &DVector<f64>| x[0] - 0.5, CrossingDirection::Both);
    assert_eq!(c.len(), 1);
    assert!((c[0].0 - 0.5).abs() < 1e-12);

    // q2(t) = sin t for the harmonic model started at (0,0,1,1).
    let z = zoo::harmonic(1.0);
    let x0 = pt(&[0.0, 0.0, 1.0, 1.0]);
    let tr = integrate_flow(&z.model, &x0, [0.0, 3.5 * PI], &FlowConfig::default()).unwrap();
    let sec = |x: &DVector<f64>| x[1];
    let all = section_crossing(&tr, &sec, CrossingDirection::Both);
    let times: Vec<f64> = all.iter().map(|c| c.0).collect();
    assert_eq!(times.len(), 3, "{times:?}");
    for (k, t) in times.iter().enumerate() {
        assert!((t - (k + 1) as f64 * PI).abs() < 1e-9);
        assert!(sec(&all[k].1).abs() <= 1e-10);
    }
    let down = section_crossing(&tr, &sec, CrossingDirection::Decreasing);
    let times: Vec<f64> = down.iter().map(|c| c.0).collect();
    assert_eq!(times.len(), 2);
    assert!((times[0] - PI).abs() < 1e-9 && (times[1] - 3.0 * PI).abs() < 1e-9);
}

#[test]
fn trajectory_table_has_one_row_per_step() {
    let z = zoo::harmonic(1.0);
    let tr = integrate_flow(&z.model, &z.x0, [0.0, 1.0], &FlowConfig::default()).unwrap();
    let table = tr.to_table();
    assert_eq!(table.lines().count(), tr.times().len() + 1);
    assert_eq!(table.lines().nth(1).unwrap().split('\t').count(), 5);
}
