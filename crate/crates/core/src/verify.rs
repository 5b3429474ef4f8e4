//! The acceptance criteria as runnable checks with fixed tolerances. Each
//! returns its measured quantities so that reports show margins, not only
//! verdicts. Seeds are offsets added to per-criterion streams.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::*;
use crate::flow::{integrate_flow, FlowConfig};
use crate::geometry::{fiberwise_iso_energetic_test, Hamiltonian, PhasePoint, PotentialField, QuadraticPotential};
use crate::linalg::{hamiltonian_basis, hamiltonian_residual, SympMatrix};
use crate::normalform::{build_normal_form, verify_normal_form, NormalFormConfig, NormalFormData};
use crate::orbits::*;
use crate::potentials::{admissible_from_b, default_tube_radius, transport_potential};
use crate::profiles::Bump;
use crate::zoo;

/// Verdict and measured quantities of one criterion, before timing.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// An acceptance criterion with its runtime budget.
#[derive(Debug, Clone, Copy)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub limit: Duration,
    pub run: fn(u64) -> Outcome,
}

/// Outcome of a timed run. `pass` includes the runtime budget.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionReport {
    /// `PASS criterion  3 <name>: <detail> [<elapsed> s of <limit> s]`.
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: {} [{:.2} s of {} s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        )
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(stream))
}

fn random_sym(rng: &mut impl Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0) * scale);
    (&a + a.transpose()) * 0.5
}

fn random_signs(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn random_curve(rng: &mut impl Rng, d: usize, delta: f64, count: usize, scale: f64) -> ControlCurve {
    let basis = ControlBasis::bumps_on(d, delta, count).unwrap();
    let coeffs = DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0) * scale);
    ControlCurve::new(basis, coeffs).unwrap()
}

/// Random curve of bumps on an arbitrary interval of the `q_1` axis.
fn random_axis_curve(rng: &mut impl Rng, d: usize, lo: f64, hi: f64, count: usize) -> ControlCurve {
    let bumps = (0..count)
        .map(|_| {
            let w = rng.random_range(0.1..0.3) * (hi - lo);
            Bump::new(rng.random_range(lo + w..hi - w), w)
        })
        .collect();
    let basis = ControlBasis::from_bumps(d, bumps);
    let coeffs = DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0));
    ControlCurve::new(basis, coeffs).unwrap()
}

fn tight_flow() -> FlowConfig {
    FlowConfig::with_tol(1e-12, 1e-13)
}

fn bordered_identity(seed: u64) -> Outcome {
    let mut r = rng(seed, 101);
    let mut worst = 0.0f64;
    for m in 0..100 {
        let d = 1 + m % 3;
        let h = zoo::random_fiberwise_quadratic(&mut r, d).unwrap();
        for _ in 0..5 {
            let n = d + 1;
            let v: Vec<f64> = (0..2 * n).map(|_| r.random_range(-1.0..1.0)).collect();
            let x = PhasePoint::from_slice(&v).unwrap();
            let g = h.fiber_matrix(x.q()).unwrap();
            let oracle = -2.0 * g.determinant() * h.value(&x.to_vector());
            let det = fiberwise_iso_energetic_test(&h, &x, None).det_value;
            worst = worst.max((det - oracle).abs() / (1.0 + oracle.abs()));
        }
    }
    // Zero-energy crossings of driven trajectories against the Sigma scan.
    // Trajectories start near the zero level of indefinite models.
    let mut crossing_err = 0.0f64;
    let mut crossings = 0;
    let mut count_mismatch = 0;
    let mut trajectories = 0;
    while trajectories < 40 {
        let h = zoo::random_fiberwise_quadratic(&mut r, 1).unwrap();
        let g = h.fiber_matrix(&DVector::zeros(2)).unwrap();
        if g.determinant() > 0.0 {
            continue;
        }
        let drive = QuadraticPotential::new(
            0.0,
            DVector::from_fn(2, |_, _| r.random_range(-0.5..0.5)),
            DMatrix::zeros(2, 2),
        );
        let driven = h.add_potential(Arc::new(drive)).unwrap();
        // A null vector of G(0) perturbed off the cone.
        let eig = g.symmetric_eigen();
        let (a, b) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        let v = eig.eigenvectors.column(0) * (b.abs()).sqrt() + eig.eigenvectors.column(1) * (a.abs()).sqrt();
        let p = v + eig.eigenvectors.column(r.random_range(0..2)) * r.random_range(-0.1..0.1);
        let x0 = PhasePoint::from_slice(&[0.0, 0.0, p[0], p[1]]).unwrap();
        trajectories += 1;
        let tr = match integrate_flow(&driven, &x0, [0.0, 2.0], &FlowConfig::default()) {
            Ok(tr) => tr,
            Err(_) => {
                count_mismatch += 1;
                continue;
            }
        };
        let energy = |t: f64| h.value(&tr.state(t));
        let mut roots = Vec::new();
        let steps = 4000;
        for i in 0..steps {
            let (a, b) = (2.0 * i as f64 / steps as f64, 2.0 * (i + 1) as f64 / steps as f64);
            if energy(a).signum() != energy(b).signum() {
                roots.push(crate::roots::illinois(energy, a, b, energy(a), energy(b), 1e-15, 1e-15));
            }
        }
        let events: Vec<f64> = sigma_scan(&h, &tr, None)
            .iter()
            .filter(|e| e.kind == SigmaEventKind::SignChange)
            .map(|e| e.t())
            .collect();
        if events.len() != roots.len() {
            count_mismatch += 1;
            continue;
        }
        crossings += roots.len();
        for (e, t) in events.iter().zip(&roots) {
            crossing_err = crossing_err.max((e - t).abs());
        }
    }
    outcome(
        worst <= 1e-8 && crossing_err <= 1e-8 && count_mismatch == 0 && crossings >= 10,
        format!(
            "max relative identity error {worst:.1e}; {crossings} crossings on {trajectories} trajectories, max time error {crossing_err:.1e}, {count_mismatch} count mismatches"
        ),
    )
}

/// Harmonic model entered at a point off the straight orbit, so every chart
/// piece is nontrivial.
fn curved_harmonic() -> zoo::ZooEntry {
    let mut z = zoo::harmonic(1.3);
    z.name = "curved-harmonic";
    z.x0 = PhasePoint::from_slice(&[0.2, 0.35, 0.9, -0.4]).unwrap();
    z
}

fn normal_form_zoo(_seed: u64) -> Outcome {
    let cases = [
        (zoo::harmonic(0.8), 0.5),
        (curved_harmonic(), 0.4),
        (zoo::nonconvex_d1(), 0.5),
        (zoo::nonconvex_d2(), 0.5),
        (zoo::pendulum_rotation(1, 1.0, 2.5), 0.4),
        (zoo::pendulum_rotation(2, 1.0, 2.5), 0.4),
    ];
    let cfg = NormalFormConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (z, delta) in cases {
        let d = z.x0.base_dim() - 1;
        match build_normal_form(&z.model, &z.x0, delta, &cfg) {
            Ok(nf) => {
                let res = verify_normal_form(&nf.chart_hamiltonian(&z.model), nf.delta, &nf.signs, 20, &cfg.flow);
                let ok = res.passes(1e-6) && nf.congruence_residual <= 1e-8 && nf.b_asymmetry <= 1e-10;
                pass &= ok;
                lines.push(format!(
                    "{} d={d} residual {:.1e} congruence {:.1e} asymmetry {:.1e}",
                    z.name,
                    res.max(),
                    nf.congruence_residual,
                    nf.b_asymmetry
                ));
            }
            Err(e) => {
                pass = false;
                lines.push(format!("{} d={d} failed: {e}", z.name));
            }
        }
    }
    outcome(pass, lines.join("; "))
}

fn linearized_consistency(seed: u64) -> Outcome {
    let mut r = rng(seed, 103);
    let cases = [(zoo::harmonic(1.1), 0.6), (zoo::nonconvex_d2(), 0.5)];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (z, delta) in cases {
        let nf = match build_normal_form(&z.model, &z.x0, delta, &NormalFormConfig::default()) {
            Ok(nf) => nf,
            Err(e) => return outcome(false, format!("{}: normal form failed: {e}", z.name)),
        };
        let cd = ControlData::from_normal_form(&nf);
        let mut model_worst = 0.0f64;
        for _ in 0..5 {
            let b = random_curve(&mut r, nf.d(), nf.delta, 3, 1.0);
            let u = admissible_from_b(&b, 0.25 * nf.delta).unwrap();
            let full = chart_transition_map(&z.model, &nf, Some(&u), nf.delta, &tight_flow());
            let ctrl = transition_ode_solve(&cd, Some(&u.control()), nf.delta);
            match (full, ctrl) {
                (Ok(f), Ok(c)) => model_worst = model_worst.max((f.matrix() - c.matrix()).amax()),
                _ => model_worst = f64::INFINITY,
            }
        }
        lines.push(format!("{} max deviation {model_worst:.1e}", z.name));
        worst = worst.max(model_worst);
    }
    outcome(worst <= 1e-5, lines.join("; "))
}

fn bracket_formulas(seed: u64) -> Outcome {
    let mut r = rng(seed, 104);
    let mut dev = 0.0f64;
    let mut ham = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=4);
        let signs = random_signs(&mut r, d);
        let k0 = random_sym(&mut r, d, 2.0);
        let k1 = random_sym(&mut r, d, 2.0);
        let b = random_sym(&mut r, d, 2.0);
        let cd = ControlData::new(&signs, KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap();
        let rec = bracket_sequence(&cd, &b, 3).unwrap();
        let closed = bracket_closed_forms(&cd, &b);
        for (w, c) in rec.iter().zip(&closed) {
            dev = dev.max((w - c).amax() / (1.0 + c.amax()));
            ham = ham.max(hamiltonian_residual(w) / (1.0 + w.amax()));
        }
        for w in bracket_sequence(&cd, &b, 4).unwrap() {
            ham = ham.max(hamiltonian_residual(&w) / (1.0 + w.amax()));
        }
    }
    outcome(
        dev <= 1e-9 && ham <= 1e-10,
        format!("max recursion vs closed form {dev:.1e}; max Hamiltonian residual {ham:.1e}"),
    )
}

fn kd_criterion(seed: u64) -> Outcome {
    let d1 = (0..20).all(|i| {
        let k = DMatrix::from_element(1, 1, i as f64 - 10.0);
        let m = kd_membership(&[1.0], &k).unwrap();
        m.target_dim == 0 && !m.member
    });
    let id = kd_membership(&[1.0, 1.0], &DMatrix::identity(2, 2)).unwrap();
    let diag = kd_membership(&[1.0, 1.0], &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
    let mut total = 0;
    let mut disagreements = 0;
    let mut in_band = 0;
    let mut members = 0;
    for d in 1..=4 {
        let c = kd_characterization_check(d, 125, seed.wrapping_add(500 + d as u64)).unwrap();
        total += c.trials;
        disagreements += c.disagreements_outside_band;
        in_band += c.in_band;
        members += c.members;
    }
    let pass = d1 && id.rank.rank == 0 && id.member && diag.rank.rank == 1 && !diag.member && disagreements == 0 && total == 500;
    outcome(
        pass,
        format!(
            "d = 1 never a member: {d1}; K = I rank {} member {}; K = diag(1,2) rank {} member {}; {total} random K: {members} members, {disagreements} disagreements outside the gap band, {in_band} in band",
            id.rank.rank, id.member, diag.rank.rank, diag.member
        ),
    )
}

fn controllability_span(seed: u64) -> Outcome {
    let mut r = rng(seed, 106);
    let mut tested = 0;
    let mut deficient = 0;
    let mut min_margin = f64::INFINITY;
    while tested < 100 {
        let d = 1 + tested % 3;
        let signs = random_signs(&mut r, d);
        let k0 = random_sym(&mut r, d, 2.0);
        if kd_membership(&signs, &k0).unwrap().member {
            continue;
        }
        let k1 = random_sym(&mut r, d, 2.0);
        let cd = ControlData::new(&signs, KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap();
        let s = span_test(&cd, 3).unwrap();
        if !s.full {
            deficient += 1;
        }
        min_margin = min_margin.min(s.rank.margin());
        tested += 1;
    }
    let mut obstructed = Vec::new();
    let mut obstructed_ok = true;
    for d in 1..=3 {
        let cd = ControlData::constant(&vec![1.0; d], DMatrix::identity(d, d), 1.0).unwrap();
        let rank = span_test(&cd, 3).unwrap().rank.rank;
        let want = d * (2 * d + 1) - d * (d - 1) / 2;
        obstructed_ok &= rank == want;
        obstructed.push(format!("d={d} rank {rank} (expected {want})"));
    }
    outcome(
        deficient == 0 && obstructed_ok,
        format!(
            "{tested} random non-members: {deficient} without full span, smallest singular margin {min_margin:.1e}; K = I: {}",
            obstructed.join(", ")
        ),
    )
}

/// Synthesizes the chart control reaching `L_0(delta) exp(eps N)` and
/// realizes it as a transported potential on the original model.
fn realize(
    z: &zoo::ZooEntry,
    nf: &NormalFormData,
    orbit: &PeriodicOrbit,
    frame: &SectionFrame,
    l0_full: &DMatrix<f64>,
    n: &DMatrix<f64>,
    eps: f64,
) -> Result<(f64, usize), String> {
    let cd = ControlData::from_normal_form(nf);
    let basis = ControlBasis::bumps_on(nf.d(), nf.delta, 8).map_err(|e| e.to_string())?;
    let l0 = transition_ode_solve(&cd, None, nf.delta).map_err(|e| e.to_string())?;
    let step = expm(&(n * eps));
    let target = SympMatrix::new(l0.matrix() * &step, 1e-8).map_err(|e| e.to_string())?;
    let syn = synthesize_control(&cd, &target, &basis, &SynthesisConfig::default()).map_err(|e| e.to_string())?;
    // The potential realizing the control `B` has second jet `-B`.
    let b = syn.b.scaled(-1.0);
    let support = b.support().ok_or("empty control")?;
    let r = default_tube_radius(orbit, &nf.chart, support, (0.0, nf.delta));
    let u = admissible_from_b(&b, r).map_err(|e| e.to_string())?;
    let u = transport_potential(Arc::new(u), &nf.chart).map_err(|e| e.to_string())?;
    let l = restricted_return_map(&z.model, orbit, frame, Some(&u as &dyn PotentialField)).map_err(|e| e.to_string())?;
    let want = l0_full * &step;
    let rel = (l.matrix() - &want).norm() / (&want - l0_full).norm();
    Ok((rel, syn.history.len() - 1))
}

fn perturbation_realization(seed: u64) -> Outcome {
    let z = zoo::anisotropic_harmonic(1.0, 1.7);
    let nf = match build_normal_form(&z.model, &z.x0, 1.0, &NormalFormConfig::default()) {
        Ok(nf) => nf,
        Err(e) => return outcome(false, format!("normal form failed: {e}")),
    };
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &tight_flow()).unwrap();
    let frame = nf.chart_frame(&z.model, &orbit, 0.0).unwrap();
    let l0_full = restricted_return_map(&z.model, &orbit, &frame, None).unwrap().into_matrix();
    let mut r = rng(seed, 107);
    let basis = hamiltonian_basis(nf.d());
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for _ in 0..5 {
        let mut n = DMatrix::zeros(2 * nf.d(), 2 * nf.d());
        for e in &basis {
            n += e * r.random_range(-1.0..1.0);
        }
        let n = &n / n.norm();
        match realize(&z, &nf, &orbit, &frame, &l0_full, &n, 1e-3) {
            Ok((rel, iters)) => {
                worst = worst.max(rel);
                lines.push(format!("{rel:.1e} ({iters} iterations)"));
            }
            Err(e) => {
                worst = f64::INFINITY;
                lines.push(format!("failed: {e}"));
            }
        }
    }
    outcome(
        worst <= 0.1,
        format!("delta {:.3}; relative residuals {}", nf.delta, lines.join(", ")),
    )
}

fn reversibility_obstruction(seed: u64) -> Outcome {
    let z = zoo::pendulum_well(2, 1.5, 0.3, 1.0);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &tight_flow()).unwrap();
    let n = z.model.base_dim();
    let mut normal = DVector::zeros(2 * n);
    normal[n] = 1.0;
    let frame = SectionFrame::with_normal(&z.model, &orbit, 0.0, normal).unwrap();
    let d = n - 1;
    let mut rev = DMatrix::identity(2 * d, 2 * d);
    for i in d..2 * d {
        rev[(i, i)] = -1.0;
    }
    let mut r = rng(seed, 108);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let b = random_axis_curve(&mut r, d, -1.0, 1.0, 3);
        let u = admissible_from_b(&b, 0.3).unwrap();
        match restricted_return_map(&z.model, &orbit, &frame, Some(&u as &dyn PotentialField)) {
            Ok(l) => {
                let m = l.matrix();
                worst = worst.max((&rev - m * &rev * m).amax());
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    let neat = neat_times(&z.model, &orbit, &NeatConfig::default());
    outcome(
        worst <= 1e-5 && neat.is_empty(),
        format!(
            "max |R - L R L| {worst:.1e} over 10 potentials; neat times empty: {}",
            neat.is_empty()
        ),
    )
}

fn degenerate_family(seed: u64) -> Outcome {
    let z = zoo::momentum_linear(2);
    let orbit = PeriodicOrbit::from_known(&z.model, z.x0.clone(), z.period, &tight_flow()).unwrap();
    let frame = SectionFrame::at_time(&z.model, &orbit, 0.0).unwrap();
    let mut r = rng(seed, 109);
    let d = 2;
    let mut worst = 0.0f64;
    let mut lower = 0.0f64;
    for _ in 0..10 {
        let b = random_axis_curve(&mut r, d, 0.0, 2.0 * PI, 3);
        let u = admissible_from_b(&b, 0.5).unwrap();
        match restricted_return_map(&z.model, &orbit, &frame, Some(&u as &dyn PotentialField)) {
            Ok(l) => {
                let m = l.matrix();
                let top = m.view((0, 0), (d, 2 * d)).into_owned();
                let mut want = DMatrix::zeros(d, 2 * d);
                want.view_mut((0, 0), (d, d)).fill_with_identity();
                worst = worst.max((top - want).amax());
                lower = lower.max(m.view((d, 0), (d, d)).amax());
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    outcome(
        worst <= 1e-8 && lower > 1e-3,
        format!("max first block row deviation from [I, 0] {worst:.1e}; potentials move the lower block by up to {lower:.2}"),
    )
}

fn dirac_spanning(_seed: u64) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let k1 = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, -1.2]);
    let cases = [
        ControlData::constant(&[1.0], DMatrix::from_element(1, 1, 0.8), 1.0).unwrap(),
        ControlData::new(&[1.0, -1.0], KProfile::Polynomial(vec![k1, DMatrix::identity(2, 2) * 0.2]), 1.0).unwrap(),
    ];
    for cd in &cases {
        let s = dirac_control_span(cd, 0.6, 0.04).unwrap();
        let ok = s.rank.rank == 2 * cd.d() && (s.convergence_rate - 1.0).abs() <= 0.25;
        pass &= ok;
        lines.push(format!(
            "d={} rank {} of {}, convergence order {:.2}",
            cd.d(),
            s.rank.rank,
            2 * cd.d(),
            s.convergence_rate
        ));
    }
    for z in [zoo::harmonic(0.9), zoo::nonconvex_d2()] {
        let n = z.model.base_dim();
        let k = 2 * (n - 1) + 3;
        let sigmas: Vec<f64> = (1..=k).map(|i| 0.08 * i as f64).collect();
        let mut devs = Vec::new();
        let mut ranks = Vec::new();
        for w in [0.01, 0.005, 0.0025] {
            match vertical_span_check(&z.model, &z.x0, &sigmas, w) {
                Ok(v) => {
                    pass &= v.spans_verticals;
                    ranks.push(v.vertical_rank.rank);
                    devs.push(v.deviation);
                }
                Err(e) => {
                    pass = false;
                    lines.push(format!("{} failed: {e}", z.name));
                }
            }
        }
        let rates: Vec<String> = devs.windows(2).map(|p| format!("{:.2}", (p[0] / p[1]).log2())).collect();
        pass &= devs.windows(2).all(|p| (p[0] / p[1]).log2() > 0.75);
        lines.push(format!(
            "{} k={k} vertical ranks {:?} of {}, deviation orders {}",
            z.name,
            ranks,
            k * n,
            rates.join("/")
        ));
    }
    outcome(pass, lines.join("; "))
}

/// The ten acceptance criteria in order.
pub fn criteria() -> [Criterion; 10] {
    [
        Criterion { id: 1, name: "bordered determinant identity and zero-energy crossings", limit: Duration::from_secs(5), run: bordered_identity },
        Criterion { id: 2, name: "normal form conditions on the model zoo", limit: Duration::from_secs(60), run: normal_form_zoo },
        Criterion { id: 3, name: "full variational flow matches the control system", limit: Duration::from_secs(60), run: linearized_consistency },
        Criterion { id: 4, name: "bracket recursion matches closed forms", limit: Duration::from_secs(5), run: bracket_formulas },
        Criterion { id: 5, name: "exceptional set membership and repeated eigenvalues", limit: Duration::from_secs(10), run: kd_criterion },
        Criterion { id: 6, name: "bracket span is full off the exceptional set", limit: Duration::from_secs(30), run: controllability_span },
        Criterion { id: 7, name: "synthesized potentials reach nearby return maps", limit: Duration::from_secs(300), run: perturbation_realization },
        Criterion { id: 8, name: "libration return maps are reversible without neat times", limit: Duration::from_secs(60), run: reversibility_obstruction },
        Criterion { id: 9, name: "momentum-linear return maps keep first block row [I, 0]", limit: Duration::from_secs(10), run: degenerate_family },
        Criterion { id: 10, name: "Dirac controls and jets span the verticals", limit: Duration::from_secs(60), run: dirac_spanning },
    ]
}

/// Runs one criterion, converting panics into failures.
pub fn run_criterion(c: &Criterion, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(|| (c.run)(seed))).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    CriterionReport {
        id: c.id,
        name: c.name,
        pass: out.pass && elapsed <= c.limit,
        detail: out.detail,
        elapsed,
        limit: c.limit,
    }
}
