//! The six tasks. Each writes its report lines and dumps into an [`Output`]
//! and returns the failure class that decides the exit status.

use std::sync::Arc;

use bumpy_core::control::{
    bracket_sequence, dirac_control_span, expm, kd_membership, span_test, synthesize_control,
    transition_ode_solve, ControlBasis, ControlData, SynthesisConfig,
};
use bumpy_core::flow::{flow_map, integrate_flow, FlowConfig};
use bumpy_core::geometry::{fiberwise_iso_energetic_test, Hamiltonian, PhasePoint, PotentialField, QuadraticPotential};
use bumpy_core::linalg::{hamiltonian_basis, hamiltonian_residual, symmetric_basis, vectorize, RankReport, SympMatrix};
use bumpy_core::normalform::{build_normal_form, NormalFormConfig, NormalFormData};
use bumpy_core::orbits::{
    classify_orbit, find_periodic_orbit, neat_times, orbit_nondegenerate, restricted_return_map, sigma_scan,
    NeatConfig, PeriodicOrbit, ShootingConfig, SigmaEvent, SigmaEventKind,
};
use bumpy_core::potentials::{admissible_from_b, default_tube_radius, disjoint_support_check, transport_potential};
use bumpy_core::roots::illinois;
use bumpy_core::verify::{criteria, run_criterion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use crate::config::{Config, Direction, Task, Tolerances};
use crate::model::{load, Loaded};
use crate::output::Output;
use crate::Failure;

type Result<T> = std::result::Result<T, Failure>;

pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub tol: Tolerances,
    pub seed: Option<u64>,
    pub out: &'a mut Output,
}

pub fn run(task: Task, ctx: &mut Ctx) -> Result<()> {
    match task {
        Task::AnalyzeOrbit => analyze_orbit(ctx),
        Task::NormalForm => normal_form(ctx),
        Task::Controllability => controllability(ctx),
        Task::DesignPerturbation => design_perturbation(ctx),
        Task::SigmaScan => sigma_scan_task(ctx),
        Task::Verify => verify(ctx),
    }
}

fn e3(v: f64) -> String {
    format!("{v:.3e}")
}

fn flow_config(tol: &Tolerances) -> Result<FlowConfig> {
    let f = FlowConfig::with_tol(tol.flow_rel, tol.flow_abs);
    f.validate().map_err(|e| Failure::Config(format!("[tolerances] after scaling: {e}")))?;
    Ok(f)
}

fn model(ctx: &mut Ctx) -> Result<Loaded> {
    let spec = ctx
        .cfg
        .model
        .as_ref()
        .ok_or_else(|| Failure::Config("this task needs a [model] section".into()))?;
    let l = load(spec, &ctx.cfg.orbit)?;
    ctx.out.line(format!("model = {}", l.describe()));
    Ok(l)
}

fn seed(ctx: &Ctx, why: &str) -> Result<u64> {
    ctx.seed
        .ok_or_else(|| Failure::Config(format!("{why} is randomized: set [run] seed or pass --seed")))
}

fn rank_line(out: &mut Output, what: &str, r: &RankReport) {
    out.line(format!(
        "{what}: rank {}, threshold {}, margin {}",
        r.rank,
        e3(r.threshold),
        e3(r.margin())
    ));
}

fn singular_values(out: &mut Output, name: &str, title: &str, r: &RankReport) {
    let rows: Vec<Vec<f64>> = r.singular_values.iter().map(|&s| vec![s]).collect();
    out.table(name, title, &["singular value"], &rows);
}

fn periodic_orbit(ctx: &mut Ctx, l: &Loaded) -> Result<PeriodicOrbit> {
    let flow = flow_config(&ctx.tol)?;
    let x0 = l.x0()?.clone();
    let period = l.period()?;
    let orbit = if ctx.cfg.orbit.refine {
        let sc = ShootingConfig {
            flow,
            tol: ctx.tol.closure,
            ..ShootingConfig::default()
        };
        find_periodic_orbit(&l.model, &x0, period, &sc)?
    } else {
        PeriodicOrbit::from_known(&l.model, x0, period, &flow)?
    };
    let out = &mut *ctx.out;
    out.line(format!("orbit x0 = {:?}", orbit.x0.to_vector().as_slice()));
    out.line(format!("orbit period = {:.12e}", orbit.period));
    out.line(format!("orbit minimal period = {:.12e} (multiplicity {})", orbit.minimal_period, orbit.multiplicity));
    out.line(format!("orbit energy = {:.12e}", orbit.energy));
    let scale = orbit.x0.to_vector().amax().max(1.0);
    let limit = ctx.tol.closure * scale;
    let closes = out.condition(
        "orbit closes after one period",
        orbit.closure_residual <= limit,
        format!("closure residual {}, limit {}", e3(orbit.closure_residual), e3(limit)),
    );
    if !closes {
        return Err(Failure::Numerical(
            "the orbit does not close; correct [orbit] x0 and period or set refine = true".into(),
        ));
    }
    Ok(orbit)
}

fn dump_events(out: &mut Output, events: &[SigmaEvent]) {
    let rows: Vec<Vec<f64>> = events
        .iter()
        .map(|e| {
            let kind = if e.kind == SigmaEventKind::SignChange { 0.0 } else { 1.0 };
            vec![kind, e.t_lo, e.t_hi, e.det_lo, e.det_hi]
        })
        .collect();
    out.table(
        "sigma_events",
        "zeros of the bordered fiber determinant; kind 0 sign change, 1 near zero",
        &["kind", "t_lo", "t_hi", "det_lo", "det_hi"],
        &rows,
    );
}

fn event_lines(out: &mut Output, events: &[SigmaEvent]) {
    out.line(format!("bordered determinant zeros = {}", events.len()));
    for e in events {
        let kind = match e.kind {
            SigmaEventKind::SignChange => "sign change",
            SigmaEventKind::NearZero => "near zero",
        };
        out.line(format!("  {kind} at t = {:.12e} (bracket width {})", e.t(), e3(e.t_hi - e.t_lo)));
    }
}

fn analyze_orbit(ctx: &mut Ctx) -> Result<()> {
    let l = model(ctx)?;
    let orbit = periodic_orbit(ctx, &l)?;
    let c = classify_orbit(&l.model, &orbit);
    let out = &mut *ctx.out;
    let tm = orbit.minimal_period;
    out.condition(
        "neat times exist",
        !c.neat.is_empty(),
        format!("measure {} of minimal period {}", e3(c.neat.measure() + 0.0), e3(tm)),
    );
    for &(a, b) in &c.neat.intervals {
        out.line(format!("  neat interval ({a:.12e}, {b:.12e})"));
    }
    event_lines(out, &c.sigma_events);
    out.condition(
        "some neat time has non-degenerate bordered fiber Hessian",
        c.perturbable,
        format!("{} joint intervals, every sampled time: {}", c.joint.len(), c.joint_all),
    );
    match (&c.return_map, c.anchor) {
        (Some(lmap), Some(anchor)) => {
            let v = orbit_nondegenerate(lmap, ctx.tol.nondegeneracy);
            out.line(format!("return map section at t = {anchor:.12e}"));
            out.condition(
                "linearized return map has no eigenvalue 1",
                v.verdict,
                format!("distance of the spectrum to 1 is {}, limit {}", e3(v.distance_to_1), e3(ctx.tol.nondegeneracy)),
            );
            out.line(format!("return map symplectic residual = {}", e3(lmap.residual())));
            out.matrix("return_map", "restricted linearized return map", lmap.matrix());
            let rows: Vec<Vec<f64>> = v.eigenvalues.iter().map(|&(re, im)| vec![re, im]).collect();
            out.table("return_map_eigenvalues", "eigenvalues of the return map", &["re", "im"], &rows);
        }
        _ => out.line("return map: no transverse section found at the tried anchors"),
    }
    let rows: Vec<Vec<f64>> = c.neat.intervals.iter().map(|&(a, b)| vec![a, b]).collect();
    out.table("neat_intervals", "neat time intervals", &["start", "end"], &rows);
    let rows: Vec<Vec<f64>> = c.joint.iter().map(|&(a, b)| vec![a, b]).collect();
    out.table(
        "joint_intervals",
        "neat times with non-degenerate bordered fiber Hessian",
        &["start", "end"],
        &rows,
    );
    dump_events(out, &c.sigma_events);
    Ok(())
}

fn nf_config(tol: &Tolerances) -> Result<NormalFormConfig> {
    Ok(NormalFormConfig {
        flow: flow_config(tol)?,
        residual_tol: tol.normal_form,
        ..NormalFormConfig::default()
    })
}

fn report_normal_form(out: &mut Output, nf: &NormalFormData, requested: f64, tol: &Tolerances, samples: usize) {
    out.line(format!("normal form delta = {:.12e} (requested {requested:.12e}, {} halvings)", nf.delta, nf.halvings));
    let signs: Vec<String> = nf.signs.iter().map(|v| format!("{v:+.0}")).collect();
    out.line(format!("normal form D = diag({})", signs.join(", ")));
    for (name, v) in nf.residuals.entries() {
        out.condition(
            &format!("normal form: {name}"),
            v <= tol.normal_form,
            format!("residual {}, limit {}", e3(v), e3(tol.normal_form)),
        );
    }
    out.condition(
        "frame solution satisfies M D M^T = A",
        nf.congruence_residual <= 1e-8,
        format!("residual {}, limit 1.000e-8", e3(nf.congruence_residual)),
    );
    out.condition(
        "frame solution keeps B symmetric",
        nf.b_asymmetry <= 1e-10,
        format!("residual {}, limit 1.000e-10", e3(nf.b_asymmetry)),
    );
    let d = nf.d();
    out.table("normal_form_signs", "diagonal of D", &[], &[nf.signs.iter().copied().collect()]);
    let mut cols = vec!["t".to_string(), "a".to_string()];
    for r in 0..d {
        for c in 0..d {
            cols.push(format!("K{}{}", r + 1, c + 1));
        }
    }
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..samples)
        .map(|i| {
            let t = -nf.delta + 2.0 * nf.delta * i as f64 / (samples - 1) as f64;
            let mut row = vec![t, nf.a_at(t)];
            let k = nf.k_at(t);
            row.extend((0..d).flat_map(|r| (0..d).map(move |c| (r, c))).map(|(r, c)| k[(r, c)]));
            row
        })
        .collect();
    out.table("normal_form_k", "a(t) and K(t) row-major on [-delta, delta]", &cols, &rows);
}

/// Normal form at orbit time `t0` of the orbit through the configured point.
fn normal_form_at(ctx: &mut Ctx, l: &Loaded) -> Result<NormalFormData> {
    let spec = &ctx.cfg.normal_form;
    let flow = flow_config(&ctx.tol)?;
    let x0 = l.x0()?;
    let x = if spec.t0 == 0.0 {
        x0.clone()
    } else {
        PhasePoint::from_vector(&flow_map(&l.model, &x0.to_vector(), spec.t0, &flow)?)?
    };
    ctx.out.line(format!("chart origin at orbit time {:.12e}: {:?}", spec.t0, x.to_vector().as_slice()));
    let nf = build_normal_form(&l.model, &x, spec.delta, &nf_config(&ctx.tol)?)?;
    report_normal_form(ctx.out, &nf, spec.delta, &ctx.tol, spec.samples);
    Ok(nf)
}

fn normal_form(ctx: &mut Ctx) -> Result<()> {
    let l = model(ctx)?;
    normal_form_at(ctx, &l).map(|_| ())
}

fn controllability(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.cfg.controllability.clone();
    let cd = match (&spec.signs, &spec.k) {
        (Some(signs), Some(k)) => {
            ctx.out.line("control data = constant K from [controllability] on [0, 1]");
            ControlData::constant(signs, k.clone(), 1.0)?
        }
        _ => {
            let l = model(ctx)?;
            ControlData::from_normal_form(&normal_form_at(ctx, &l)?)
        }
    };
    let out = &mut *ctx.out;
    let d = cd.d();
    let signs: Vec<f64> = cd.signs.iter().copied().collect();
    let k0 = cd.k_at(0.0);
    out.matrix("k0", "K(0)", &k0);

    let span = span_test(&cd, spec.depth)?;
    rank_line(out, &format!("bracket span at depth {}", spec.depth), &span.rank);
    out.condition(
        &format!("brackets up to depth {} span sp(2d)", spec.depth),
        span.full,
        format!("rank {} of {}", span.rank.rank, span.dim_target),
    );
    singular_values(out, "span_singular_values", "singular values of the bracket matrix", &span.rank);

    let kd = kd_membership(&signs, &k0)?;
    rank_line(out, "commutator map B -> B D K - K D B", &kd.rank);
    out.condition(
        "K(0) lies outside the exceptional set",
        !kd.member,
        format!("commutator rank {} of {}", kd.rank.rank, kd.target_dim),
    );
    singular_values(out, "kd_singular_values", "singular values of the commutator map", &kd.rank);
    out.condition(
        "span is full whenever K(0) lies outside the exceptional set",
        kd.member || span.full,
        format!("outside {}, full {}", !kd.member, span.full),
    );

    let mut rows = Vec::new();
    for (j, e) in symmetric_basis(d).iter().enumerate() {
        for (i, w) in bracket_sequence(&cd, e, spec.depth)?.iter().enumerate() {
            let mut row = vec![j as f64, i as f64];
            row.extend(vectorize(w).iter());
            rows.push(row);
        }
    }
    out.table(
        "brackets",
        "W_i(0, E_j) column-major after the indices j and i",
        &["j", "i", "entries"],
        &rows,
    );

    if spec.dirac {
        let sigma = 0.5 * cd.delta;
        let dirac = dirac_control_span(&cd, sigma, 0.02 * cd.delta)?;
        out.condition(
            "separate Dirac controls span R^2d",
            dirac.rank.rank == 2 * d,
            format!("rank {} of {}, convergence order {:.2}", dirac.rank.rank, 2 * d, dirac.convergence_rate),
        );
        out.line(format!(
            "combined Dirac controls rank = {} (at most {})",
            dirac.pair_rank.rank,
            2 * d - 1
        ));
        out.matrix("dirac_vectors", "responses to Dirac controls at sigma = delta/2", &dirac.vectors);
        out.matrix("dirac_limits", "limits of the Dirac responses", &dirac.limits);
    }
    Ok(())
}

fn direction(ctx: &Ctx, d: usize) -> Result<DMatrix<f64>> {
    let n = match &ctx.cfg.perturbation.direction {
        Direction::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed(ctx, "a random direction")?);
            let mut n = DMatrix::zeros(2 * d, 2 * d);
            for e in hamiltonian_basis(d) {
                n += e * rng.random_range(-1.0..1.0);
            }
            n
        }
        Direction::Matrix(m) => {
            if m.shape() != (2 * d, 2 * d) {
                return Err(Failure::Config(format!(
                    "[perturbation] direction: expected {0} x {0} for d = {d}, got {1} x {2}",
                    2 * d,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if hamiltonian_residual(m) > 1e-9 * (1.0 + m.amax()) {
                return Err(Failure::Config(
                    "[perturbation] direction: J N must be symmetric (N Hamiltonian)".into(),
                ));
            }
            m.clone()
        }
    };
    let norm = n.norm();
    if !(norm > 0.0) {
        return Err(Failure::Config("[perturbation] direction is zero".into()));
    }
    Ok(n / norm)
}

fn design_perturbation(ctx: &mut Ctx) -> Result<()> {
    let l = model(ctx)?;
    let orbit = periodic_orbit(ctx, &l)?;
    let flow = flow_config(&ctx.tol)?;
    let p = ctx.cfg.perturbation.clone();
    let neat = neat_times(&l.model, &orbit, &NeatConfig::default());
    let out = &mut *ctx.out;
    let tm = orbit.minimal_period;
    let has_neat = out.condition(
        "neat times exist",
        !neat.is_empty(),
        format!("measure {} of minimal period {}", e3(neat.measure() + 0.0), e3(tm)),
    );
    if !has_neat {
        return Err(Failure::Hypothesis("no neat time".into()));
    }
    let requested = ctx.cfg.normal_form.delta;
    let (t0, delta) = match p.t0 {
        Some(t0) => (t0, requested),
        None if neat.all => (0.0, requested),
        None => {
            let &(a, b) = neat
                .intervals
                .iter()
                .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
                .expect("non-empty neat set");
            (a + 0.05 * (b - a), requested.min(0.9 * (b - a)))
        }
    };
    let inside = (0..=64).all(|k| neat.contains(t0 + delta * k as f64 / 64.0));
    out.condition(
        "control window lies in the neat set",
        inside,
        format!("window [{t0:.6e}, {:.6e}]", t0 + delta),
    );
    if !inside {
        return Err(Failure::Hypothesis(format!(
            "the control window [{t0}, {}] leaves the neat set",
            t0 + delta
        )));
    }

    let x_t0 = PhasePoint::from_vector(&orbit.state(t0))?;
    let shifted = PeriodicOrbit::from_known(&l.model, x_t0.clone(), orbit.period, &flow)?;
    let nf = build_normal_form(&l.model, &x_t0, delta, &nf_config(&ctx.tol)?)?;
    report_normal_form(out, &nf, delta, &ctx.tol, ctx.cfg.normal_form.samples);
    let window = (0.0, nf.delta);
    let frame = nf.chart_frame(&l.model, &shifted, 0.0)?;
    let l0_full = restricted_return_map(&l.model, &shifted, &frame, None)?.into_matrix();
    out.matrix("return_map_unperturbed", "return map of H in the chart frame", &l0_full);

    let cd = ControlData::from_normal_form(&nf);
    let d = cd.d();
    let span = span_test(&cd, 3)?;
    out.condition(
        "brackets up to depth 3 span sp(2d)",
        span.full,
        format!("rank {} of {}", span.rank.rank, span.dim_target),
    );
    let n = direction(ctx, d)?;
    let out = &mut *ctx.out;
    out.matrix("direction", "unit Hamiltonian direction N", &n);
    out.line(format!("target = L0(delta) exp(epsilon N), epsilon = {:e}", p.epsilon));
    let l0 = transition_ode_solve(&cd, None, nf.delta)?;
    let step = expm(&(&n * p.epsilon));
    let target = SympMatrix::new(l0.matrix() * &step, 1e-8)?;
    let basis = ControlBasis::bumps_on(d, nf.delta, p.basis_count)?;
    let tnorm = target.matrix().norm();
    let scfg = SynthesisConfig {
        residual_tol: 1e-2 * ctx.tol.synthesis * tnorm,
        ..SynthesisConfig::default()
    };
    let syn = synthesize_control(&cd, &target, &basis, &scfg)?;
    if let Some(w) = &syn.warning {
        out.line(format!("synthesis warning: {w}"));
    }
    rank_line(out, "synthesis sensitivity", &syn.sensitivity_rank);
    let rel = syn.residual / tnorm;
    let reached = out.condition(
        "control system reaches the target",
        rel <= ctx.tol.synthesis,
        format!("relative residual {}, limit {}", e3(rel), e3(ctx.tol.synthesis)),
    );
    out.condition(
        "synthesis residuals decrease monotonically",
        syn.history.windows(2).all(|w| w[1] <= w[0]),
        format!("{} accepted iterations", syn.history.len() - 1),
    );
    out.matrix("target_control", "target L0(delta) exp(epsilon N)", target.matrix());
    out.matrix("achieved_control", "L_B(delta) of the synthesized control", syn.achieved.matrix());
    let rows: Vec<Vec<f64>> = syn.history.iter().map(|&r| vec![r]).collect();
    out.table("synthesis_history", "residual after each accepted iteration", &["residual"], &rows);
    let rows: Vec<Vec<f64>> = (0..basis.len())
        .map(|i| {
            let (bump, _) = basis.element(i);
            let m = i % (d * (d + 1) / 2);
            vec![i as f64, bump.center, bump.half_width, m as f64, syn.b.coeffs[i]]
        })
        .collect();
    out.table(
        "control_coefficients",
        "control B = sum c_i bump_i E_m, E_m the symmetric basis",
        &["i", "center", "half_width", "m", "c"],
        &rows,
    );
    if !reached {
        return Err(Failure::Numerical("synthesis did not reach the target".into()));
    }

    // The potential realizing the control `B` has second jet `-B`.
    let b = syn.b.scaled(-1.0);
    let support = b.support().ok_or_else(|| Failure::Numerical("synthesized control is zero".into()))?;
    let r = default_tube_radius(&shifted, &nf.chart, support, window);
    out.line(format!("tube radius = {r:.6e}"));
    let u = transport_potential(Arc::new(admissible_from_b(&b, r)?), &nf.chart)?;
    let mut jet = 0.0f64;
    for k in 0..=100 {
        let q = shifted.base_point(nf.delta * k as f64 / 100.0);
        jet = jet.max(u.value(&q).abs()).max(u.gradient(&q).amax());
    }
    let admissible = out.condition(
        "potential and its gradient vanish along the orbit",
        jet <= ctx.tol.admissibility,
        format!("max {}, limit {}", e3(jet), e3(ctx.tol.admissibility)),
    );
    let disjoint = out.condition(
        "support tube avoids the orbit outside the window",
        disjoint_support_check(&u, &shifted, window, 1e-3 * r),
        format!("margin {}", e3(1e-3 * r)),
    );
    let rows: Vec<Vec<f64>> = (0..=ctx.cfg.normal_form.samples)
        .map(|k| {
            let t = nf.delta * k as f64 / ctx.cfg.normal_form.samples as f64;
            let mut row = vec![t];
            row.extend(b.value(t).iter());
            row
        })
        .collect();
    out.table(
        "potential_hessian",
        "transverse Hessian of the potential on the chart axis, column-major",
        &["t", "entries"],
        &rows,
    );

    let lmap = restricted_return_map(&l.model, &shifted, &frame, Some(&u as &dyn PotentialField))?;
    let want = &l0_full * &step;
    let rel = (lmap.matrix() - &want).norm() / (&want - &l0_full).norm();
    let realized = out.condition(
        "return map of H + u reaches the target",
        rel <= ctx.tol.realization,
        format!(
            "|L - L0 exp(eps N)| / |L0 exp(eps N) - L0| = {}, limit {}",
            e3(rel),
            e3(ctx.tol.realization)
        ),
    );
    out.matrix("return_map_target", "L0 exp(epsilon N) in the chart frame", &want);
    out.matrix("return_map_perturbed", "return map of H + u in the chart frame", lmap.matrix());
    if !(admissible && disjoint && realized) {
        return Err(Failure::Numerical("the potential does not realize the target".into()));
    }
    Ok(())
}

fn sigma_scan_task(ctx: &mut Ctx) -> Result<()> {
    let l = model(ctx)?;
    let flow = flow_config(&ctx.tol)?;
    let x0 = l.x0()?.clone();
    let n = l.model.base_dim();
    let t_end = ctx.cfg.sigma.t_end;
    let driven = match &ctx.cfg.sigma.drive {
        Some(c) if c.len() != n => {
            return Err(Failure::Config(format!("[sigma] drive: expected {n} entries, got {}", c.len())));
        }
        Some(c) => {
            let drive = QuadraticPotential::new(0.0, DVector::from_column_slice(c), DMatrix::zeros(n, n));
            l.model.add_potential(Arc::new(drive))?
        }
        None => l.model.clone(),
    };
    let out = &mut *ctx.out;
    out.line(format!("trajectory of the driven system on [0, {t_end:e}] from {:?}", x0.to_vector().as_slice()));
    let traj = integrate_flow(&driven, &x0, [0.0, t_end], &flow)?;
    let events = sigma_scan(&l.model, &traj, None);
    event_lines(out, &events);
    dump_events(out, &events);

    let Some(_) = l.model.fiber_matrix(x0.q()) else {
        out.line("zero-energy comparison: not applicable, the model is not fiberwise quadratic");
        return Ok(());
    };
    // Bordered determinant of a fiberwise quadratic H is -det(G) p^T G p:
    // it vanishes exactly where the fiber energy does.
    let fiber_energy = |t: f64| {
        let x = traj.state(t);
        let g = l.model.fiber_matrix(&x.rows(0, n).into_owned()).expect("fiberwise quadratic");
        let p = x.rows(n, n);
        0.5 * p.dot(&(&g * p))
    };
    let steps = (2000.0 * t_end).ceil().max(4000.0) as usize;
    let mut roots = Vec::new();
    let mut min_det_g = f64::INFINITY;
    for i in 0..steps {
        let (a, b) = (t_end * i as f64 / steps as f64, t_end * (i + 1) as f64 / steps as f64);
        let (fa, fb) = (fiber_energy(a), fiber_energy(b));
        if fa.signum() != fb.signum() {
            roots.push(illinois(fiber_energy, a, b, fa, fb, 1e-15, 1e-15));
        }
        let q = traj.state(a).rows(0, n).into_owned();
        min_det_g = min_det_g.min(l.model.fiber_matrix(&q).expect("fiberwise quadratic").determinant().abs());
    }
    out.line(format!("zero fiber-energy times = {}", roots.len()));
    out.line(format!("smallest |det G| along the trajectory = {}", e3(min_det_g)));
    let sign_changes: Vec<f64> = events.iter().filter(|e| e.kind == SigmaEventKind::SignChange).map(SigmaEvent::t).collect();
    let err = if sign_changes.len() == roots.len() {
        sign_changes.iter().zip(&roots).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let rows: Vec<Vec<f64>> = roots.iter().map(|&t| vec![t]).collect();
    out.table("zero_energy_times", "zeros of p^T G(q) p / 2 along the trajectory", &["t"], &rows);
    let rows: Vec<Vec<f64>> = (0..=400)
        .map(|k| {
            let t = t_end * k as f64 / 400.0;
            let x = traj.state(t);
            let det = fiberwise_iso_energetic_test(&l.model, &PhasePoint::from_vector(&x).expect("finite state"), None).det_value;
            vec![t, l.model.value(&x), fiber_energy(t), det]
        })
        .collect();
    out.table(
        "trajectory_samples",
        "undriven H, fiber energy and bordered determinant along the trajectory",
        &["t", "H", "fiber_energy", "bordered_det"],
        &rows,
    );
    let ok = out.condition(
        "bordered determinant changes sign exactly at zero fiber-energy times",
        err <= ctx.tol.sigma_match,
        format!(
            "{} sign changes, {} zeros, max time difference {}, limit {}",
            sign_changes.len(),
            roots.len(),
            e3(err),
            e3(ctx.tol.sigma_match)
        ),
    );
    if !ok {
        return Err(Failure::Numerical("sigma events and zero-energy times disagree".into()));
    }
    Ok(())
}

fn verify(ctx: &mut Ctx) -> Result<()> {
    let seed = seed(ctx, "the verification suite")?;
    let wanted = &ctx.cfg.verify.criteria;
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria().iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        ran += 1;
        let r = run_criterion(c, seed);
        if !r.pass {
            failed += 1;
        }
        ctx.out.condition(&format!("criterion {:>2} {}", r.id, r.name), r.pass, &r.detail);
        eprintln!("criterion {} took {:.2} s of {} s", r.id, r.elapsed.as_secs_f64(), r.limit.as_secs());
    }
    ctx.out.line(format!("verification: {} of {ran} criteria passed", ran - failed));
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} criteria failed")));
    }
    Ok(())
}
