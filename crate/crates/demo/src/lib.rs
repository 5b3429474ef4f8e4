//! Browser bindings. Every export takes plain numbers or JSON text and returns
//! a JSON object; failures come back as `{"error": "..."}` so the page never
//! has to catch exceptions.

use bumpy_core::control::{
    expm, kd_membership, span_test, synthesize_control, transition_ode_solve, ControlBasis, ControlData,
    SynthesisConfig,
};
use bumpy_core::flow::FlowConfig;
use bumpy_core::linalg::{eigenvalues, hamiltonian_basis, row_major, SympMatrix};
use bumpy_core::orbits::{classify_orbit, orbit_nondegenerate, PeriodicOrbit};
use bumpy_core::zoo;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn respond(r: Result<Value>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn parse_signs(src: &str) -> Result<Vec<f64>> {
    let s: Vec<f64> = serde_json::from_str(src).map_err(|e| format!("signs: {e}"))?;
    if s.is_empty() || s.len() > 4 {
        return Err("signs: expected 1 to 4 entries".into());
    }
    Ok(s)
}

fn parse_matrix(src: &str, n: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(src).map_err(|e| format!("K: {e}"))?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("K: expected {n} rows of {n} numbers"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Bracket span and exceptional-set test for constant data `D = diag(signs)`, `K`.
#[wasm_bindgen]
pub fn controllability(signs: &str, k: &str, depth: usize) -> String {
    respond((|| {
        let signs = parse_signs(signs)?;
        let k = parse_matrix(k, signs.len())?;
        let cd = ControlData::constant(&signs, k.clone(), 1.0).map_err(|e| e.to_string())?;
        let span = span_test(&cd, depth).map_err(|e| e.to_string())?;
        let kd = kd_membership(&signs, &k).map_err(|e| e.to_string())?;
        Ok(json!({
            "depth": depth,
            "span_rank": span.rank.rank,
            "span_target": span.dim_target,
            "span_full": span.full,
            "span_singular_values": span.rank.singular_values,
            "span_threshold": span.rank.threshold,
            "exceptional": kd.member,
            "commutator_rank": kd.rank.rank,
            "commutator_target": kd.target_dim,
            "commutator_singular_values": kd.rank.singular_values,
        }))
    })())
}

/// Neat times, bordered-determinant zeros and the return map of the `q1`
/// oscillation of `H = |p|^2/2 + (a^2 q2^2 + b^2 q3^2)/2`.
#[wasm_bindgen]
pub fn oscillator(a: f64, b: f64) -> String {
    respond((|| {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err("a and b must be positive".into());
        }
        let e = zoo::anisotropic_harmonic(a, b);
        let orbit =
            PeriodicOrbit::from_known(&e.model, e.x0.clone(), e.period, &FlowConfig::default()).map_err(|e| e.to_string())?;
        let c = classify_orbit(&e.model, &orbit);
        let ret = c.return_map.as_ref().map(|l| {
            let v = orbit_nondegenerate(l, 1e-6);
            json!({
                "matrix": rows(l.matrix()),
                "eigenvalues": eigenvalues(l.matrix()),
                "distance_to_1": v.distance_to_1,
                "nondegenerate": v.verdict,
            })
        });
        let events: Vec<f64> = c.sigma_events.iter().map(|e| e.t()).collect();
        Ok(json!({
            "period": orbit.period,
            "minimal_period": orbit.minimal_period,
            "energy": orbit.energy,
            "neat_all": c.neat.all,
            "neat_intervals": c.neat.intervals,
            "neat_measure": c.neat.measure() + 0.0,
            "sigma_zeros": events,
            "joint_intervals": c.joint,
            "perturbable": c.perturbable,
            "return_map": ret,
        }))
    })())
}

/// Synthesizes a bump control on `[0, 1]` whose transition matrix is
/// `L0(1) exp(epsilon N)`, with `N` a seeded random unit Hamiltonian matrix.
#[wasm_bindgen]
pub fn synthesize(signs: &str, k: &str, epsilon: f64, seed: u32, basis_count: usize) -> String {
    respond((|| {
        let signs = parse_signs(signs)?;
        let d = signs.len();
        let k = parse_matrix(k, d)?;
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err("epsilon must lie in (0, 0.1]".into());
        }
        if !(1..=16).contains(&basis_count) {
            return Err("basis count must lie in 1..=16".into());
        }
        let cd = ControlData::constant(&signs, k, 1.0).map_err(|e| e.to_string())?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.into());
        let mut n = DMatrix::zeros(2 * d, 2 * d);
        for e in hamiltonian_basis(d) {
            n += e * rng.random_range(-1.0..1.0);
        }
        n /= n.norm();
        let l0 = transition_ode_solve(&cd, None, 1.0).map_err(|e| e.to_string())?;
        let target = SympMatrix::new(l0.matrix() * expm(&(&n * epsilon)), 1e-8).map_err(|e| e.to_string())?;
        let basis = ControlBasis::bumps_on(d, 1.0, basis_count).map_err(|e| e.to_string())?;
        let tnorm = target.matrix().norm();
        let cfg = SynthesisConfig {
            residual_tol: 1e-10 * tnorm,
            ..SynthesisConfig::default()
        };
        let syn = synthesize_control(&cd, &target, &basis, &cfg).map_err(|e| e.to_string())?;
        let samples: Vec<Value> = (0..=100)
            .map(|i| {
                let t = i as f64 / 100.0;
                json!({ "t": t, "b": row_major(&syn.b.value(t)) })
            })
            .collect();
        Ok(json!({
            "direction": rows(&n),
            "relative_residual": syn.residual / tnorm,
            "history": syn.history,
            "warning": syn.warning,
            "sensitivity_rank": syn.sensitivity_rank.rank,
            "samples": samples,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn repeated_k_is_exceptional() {
        let v = call(controllability("[1, 1]", "[[1, 0], [0, 1]]", 3));
        assert_eq!(v["exceptional"], true);
        assert_eq!(v["span_full"], false);
        let v = call(controllability("[1, 1]", "[[1, 0], [0, 2]]", 3));
        assert_eq!(v["exceptional"], false);
        assert_eq!(v["span_full"], true);
    }

    #[test]
    fn bad_input_reports_an_error() {
        assert!(call(controllability("[1, 1]", "[[1, 0]]", 3))["error"].is_string());
        assert!(call(oscillator(-1.0, 1.0))["error"].is_string());
        assert!(call(synthesize("[1]", "[[1]]", 1.0, 0, 8))["error"].is_string());
    }

    #[test]
    fn integer_frequency_makes_the_return_map_degenerate() {
        let v = call(oscillator(1.3, 1.7));
        assert_eq!(v["return_map"]["nondegenerate"], true, "{v}");
        assert_eq!(v["return_map"]["matrix"].as_array().unwrap().len(), 4);
        // A full turn of the q2 oscillation per period gives eigenvalue 1.
        let v = call(oscillator(1.0, 1.7));
        assert_eq!(v["return_map"]["nondegenerate"], false, "{v}");
    }

    #[test]
    fn synthesis_reaches_the_target() {
        let v = call(synthesize("[1, -1]", "[[1, 0.2], [0.2, 2]]", 1e-3, 3, 8));
        assert!(v["relative_residual"].as_f64().unwrap() <= 1e-8, "{v}");
        assert_eq!(v["samples"].as_array().unwrap().len(), 101);
    }
}
