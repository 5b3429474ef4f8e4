use bumpy_core::control::*;
use bumpy_core::flow::FlowConfig;
use bumpy_core::linalg::{hamiltonian_residual, symmetric_basis, symplectic_residual};
use bumpy_core::normalform::{build_normal_form, NormalFormConfig};
use bumpy_core::potentials::admissible_from_b;
use bumpy_core::zoo;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sym_from(d: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

fn signs_from(bits: u8, d: usize) -> Vec<f64> {
    (0..d).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// `(d, signs, K0, K1, B)` with entries in `[-2, 2]`.
fn control_case() -> impl Strategy<Value = (usize, Vec<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    (1usize..=3, any::<u8>()).prop_flat_map(|(d, bits)| {
        let m = d * (d + 1) / 2;
        (
            Just(d),
            Just(signs_from(bits, d)),
            prop::collection::vec(-2.0..2.0f64, m),
            prop::collection::vec(-2.0..2.0f64, m),
            prop::collection::vec(-2.0..2.0f64, m),
        )
            .prop_map(move |(d, s, k0, k1, b)| (d, s, sym_from(d, &k0), sym_from(d, &k1), sym_from(d, &b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recursion_matches_closed_forms((d, signs, k0, k1, b) in control_case()) {
        let cd = ControlData::new(&signs, KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap();
        let rec = bracket_sequence(&cd, &b, 3).unwrap();
        let closed = bracket_closed_forms(&cd, &b);
        for i in 0..4 {
            let scale = 1.0 + closed[i].amax();
            prop_assert!((&rec[i] - &closed[i]).amax() <= 1e-9 * scale, "d {} W{}", d, i);
            prop_assert!(hamiltonian_residual(&rec[i]) <= 1e-10 * scale);
        }
    }

    #[test]
    fn non_members_have_full_span((d, signs, k0, k1, _b) in control_case()) {
        let member = kd_membership(&signs, &k0).unwrap();
        prop_assume!(!member.member);
        // Stay away from the rank threshold band.
        prop_assume!(d == 1 || member.rank.margin() > 1e-6);
        let cd = ControlData::new(&signs, KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap();
        let r = span_test(&cd, 3).unwrap();
        prop_assert!(r.full, "rank {} of {}", r.rank.rank, r.dim_target);
    }

    #[test]
    fn transition_maps_are_symplectic((_d, signs, k0, k1, b) in control_case(), t in 0.1..1.0f64) {
        let cd = ControlData::new(&signs, KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap();
        let basis = ControlBasis::bumps_on(cd.d(), 1.0, 2).unwrap();
        let coeffs = DVector::from_fn(basis.len(), |i, _| b[(i % cd.d(), 0)] * 0.5);
        let curve = ControlCurve::new(basis, coeffs).unwrap();
        let l = transition_ode_solve(&cd, Some(&curve), t).unwrap();
        prop_assert!(symplectic_residual(l.matrix()) <= 1e-7);
    }

    #[test]
    fn commuting_k_is_always_a_member(d in 2usize..=4, lam in -3.0..3.0f64) {
        let k = DMatrix::identity(d, d) * lam;
        let r = kd_membership(&vec![1.0; d], &k).unwrap();
        prop_assert!(r.member);
        prop_assert_eq!(r.rank.rank, 0);
    }
}

#[test]
fn span_examples() {
    let cd = ControlData::constant(&[1.0], DMatrix::from_element(1, 1, 0.3), 1.0).unwrap();
    assert_eq!(span_test(&cd, 3).unwrap().rank.rank, 3);
    let cd = ControlData::constant(&[1.0, 1.0], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])), 1.0).unwrap();
    assert_eq!(span_test(&cd, 3).unwrap().rank.rank, 10);
    let cd = ControlData::constant(&[1.0, 1.0], DMatrix::identity(2, 2), 1.0).unwrap();
    let r = span_test(&cd, 3).unwrap();
    assert_eq!(r.rank.rank, 9);
    assert!(!r.full);
    let cd = ControlData::constant(&[1.0; 3], DMatrix::identity(3, 3), 1.0).unwrap();
    assert_eq!(span_test(&cd, 3).unwrap().rank.rank, 21 - 3);
    assert!(span_test(&cd, 2).is_err());
}

#[test]
fn membership_examples() {
    let r = kd_membership(&[1.0], &DMatrix::from_element(1, 1, 2.0)).unwrap();
    assert_eq!(r.target_dim, 0);
    assert!(!r.member);
    let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 2.0]));
    assert!(kd_membership(&[1.0; 3], &k).unwrap().member);
    let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
    let r = kd_membership(&[1.0, 1.0], &k).unwrap();
    assert_eq!(r.rank.rank, 1);
    assert!(!r.member);
    assert!(kd_membership(&[1.0, 0.5], &k).is_err());
}

#[test]
fn well_separated_spectra_are_never_members() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d = rng.random_range(2..=4);
        let q = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let lam: Vec<f64> = (0..d).map(|i| i as f64 * 0.5 + rng.random_range(0.0..0.3)).collect();
        let k = &q * DMatrix::from_diagonal(&DVector::from_vec(lam)) * q.transpose();
        assert!(!kd_membership(&vec![1.0; d], &k).unwrap().member);
    }
}

#[test]
fn characterization_has_no_disagreements() {
    for d in 1..=4 {
        let r = kd_characterization_check(d, 100, 5 + d as u64).unwrap();
        assert_eq!(r.disagreements_outside_band, 0, "{r:?}");
        if d > 1 {
            assert!(r.members >= r.trials / 2, "{r:?}");
        }
    }
}

#[test]
fn synthesis_reaches_nearby_targets_d2() {
    let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.5]));
    let cd = ControlData::constant(&[1.0, -1.0], k, 1.0).unwrap();
    let basis = ControlBasis::bumps_on(2, 1.0, 8).unwrap();
    let l0 = transition_ode_solve(&cd, None, 1.0).unwrap();
    let n = bumpy_core::linalg::hamiltonian_basis(2)[3].clone();
    let target = bumpy_core::linalg::SympMatrix::new(l0.matrix() * expm(&(n * 1e-3)), 1e-9).unwrap();
    let r = synthesize_control(&cd, &target, &basis, &SynthesisConfig::default()).unwrap();
    assert!(r.residual <= 1e-8 * target.matrix().norm(), "{}", r.residual);
    for w in r.history.windows(2) {
        assert!(w[1] <= w[0], "{:?}", r.history);
    }
    assert!(symplectic_residual(r.achieved.matrix()) <= 1e-6);
}

#[test]
fn dirac_span_mixed_signs_and_curved_k() {
    let k0 = sym_from(2, &[0.7, 0.3, -1.2]);
    let k1 = sym_from(2, &[0.2, -0.4, 0.5]);
    let cd = ControlData::new(&[1.0, -1.0], KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap();
    let r = dirac_control_span(&cd, 0.6, 0.04).unwrap();
    assert_eq!(r.rank.rank, 4);
    assert_eq!(r.pair_rank.rank, 3);
    println!("errors {:?} rate {}", r.errors, r.convergence_rate);
    assert!((r.convergence_rate - 1.0).abs() < 0.25, "{}", r.convergence_rate);
}

/// The transverse block of the full variational flow along the normal form
/// segment equals the control system's `L(t)` with `B = B_u`.
#[test]
fn variational_transition_matches_control_system() {
    let z = zoo::harmonic(1.1);
    let nf = build_normal_form(&z.model, &z.x0, 0.6, &NormalFormConfig::default()).unwrap();
    let cd = ControlData::from_normal_form(&nf);
    let basis = ControlBasis::bumps_on(1, nf.delta, 3).unwrap();
    let coeffs = DVector::from_vec(vec![0.4, -0.7, 0.3]);
    let b = ControlCurve::new(basis, coeffs).unwrap();
    let u = admissible_from_b(&b, 0.5 * nf.delta).unwrap();
    let cfg = FlowConfig::with_tol(1e-12, 1e-13);
    let full = chart_transition_map(&z.model, &nf, Some(&u), nf.delta, &cfg).unwrap();
    let ctrl = transition_ode_solve(&cd, Some(&u.control()), nf.delta).unwrap();
    let err = (full.matrix() - ctrl.matrix()).amax();
    println!("transition mismatch {err:e}");
    assert!(err <= 1e-5);
    // The sign matters: the opposite control misses by O(|B|).
    let wrong = transition_ode_solve(&cd, Some(&b), nf.delta).unwrap();
    assert!((full.matrix() - wrong.matrix()).amax() > 1e-3);
}

#[test]
fn vertical_span_for_momentum_linear_model() {
    let z = zoo::momentum_linear(1);
    let sigmas: Vec<f64> = (1..=7).map(|i| 0.1 * i as f64).collect();
    let r = vertical_span_check(&z.model, &z.x0, &sigmas, 0.01).unwrap();
    println!("ranks {} {} {} deviation {:e}", r.eta_rank.rank, r.vertical_rank.rank, r.response_rank.rank, r.deviation);
    assert_eq!(r.target, 14);
    assert!(r.spans_verticals);
}

#[test]
fn vertical_span_for_harmonic_model_converges_in_width() {
    let z = zoo::harmonic(0.9);
    let sigmas: Vec<f64> = (1..=7).map(|i| 0.1 * i as f64).collect();
    let mut devs = Vec::new();
    for w in [0.02, 0.01, 0.005] {
        let r = vertical_span_check(&z.model, &z.x0, &sigmas, w).unwrap();
        println!("w {w} ranks {} {} margin {:e} deviation {:e}", r.eta_rank.rank, r.vertical_rank.rank, r.vertical_rank.margin(), r.deviation);
        assert!(r.spans_verticals);
        devs.push(r.deviation);
    }
    for p in devs.windows(2) {
        let rate = (p[0] / p[1]).log2();
        assert!(rate > 0.7, "{devs:?}");
    }
}

#[test]
fn symmetric_basis_drives_every_bracket_direction() {
    // d = 1: the three brackets W0, W1, W2 of the single basis element are
    // independent.
    let cd = ControlData::constant(&[-1.0], DMatrix::from_element(1, 1, -0.4), 1.0).unwrap();
    let e = &symmetric_basis(1)[0];
    let w = bracket_sequence(&cd, e, 2).unwrap();
    let m = DMatrix::from_columns(&w.iter().map(bumpy_core::linalg::vectorize).collect::<Vec<_>>());
    assert_eq!(bumpy_core::linalg::numerical_rank(&m, 1e-9).rank, 3);
}
