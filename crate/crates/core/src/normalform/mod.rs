//! Fibered symplectic chart along an orbit segment in which
//! `H(t e_1 + .., ..)` has the normal form `(D, K(t), a(t))`: the orbit is
//! `(t e_1, 0)`, the mixed fiber derivatives vanish on the segment and the
//! vertical fiber Hessian is the constant sign matrix `D`.

mod chart;
mod maps;
mod steps;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

pub use chart::{BaseJet, BaseMap, ChartHamiltonian, ChartPiece, FiberedChart, Generator, GeneratorJet};
pub use maps::{FlowBoxMap, MatrixMap, MomentumCurve, MomentumGenerator, QuadraticGenerator, ShearMap, StraightenMap};
pub use steps::{
    chart_momentum, diagonalize_vertical_hessian, flowbox_normalization, segment_grid, segment_point, shear_normalization,
    straighten_projection, vertical_normalization, Diagonalization, Straightening,
};

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::flow::flow_solution;
use crate::geometry::{fiberwise_iso_energetic_test, Hamiltonian, PhasePoint};
use crate::ode::FlowConfig;
use crate::orbits::{PeriodicOrbit, SectionFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormConfig {
    pub flow: FlowConfig,
    /// Bound on every verified residual.
    pub residual_tol: f64,
    /// Number of verification times in `[-delta, delta]`.
    pub n_verify: usize,
    /// Maximum number of halvings of `delta`.
    pub max_halvings: usize,
    /// Halving stops below this segment half-length. Interpolation noise
    /// grows like `1/h³` and swamps the residual tolerance beyond it.
    pub min_delta: f64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            residual_tol: 1e-6,
            n_verify: 20,
            max_halvings: 12,
            min_delta: 1e-3,
        }
    }
}

/// Maxima over the sample times of the normal-form residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormResiduals {
    /// `|phi^t(0) - (t e_1, 0)|`.
    pub orbit: f64,
    /// `|d2_{q p_hat} H(t e_1, 0)|`.
    pub q_phat: f64,
    /// `|d2_{p_1 p_hat} H(t e_1, 0)|`.
    pub p1_phat: f64,
    /// `|d2_{p_hat p_hat} H(t e_1, 0) - D|`.
    pub phat_phat_minus_d: f64,
    /// `|d2_{q_1 q} H(t e_1, 0)|`.
    pub q1_q: f64,
}

impl NormalFormResiduals {
    pub fn max(&self) -> f64 {
        [self.orbit, self.q_phat, self.p1_phat, self.phat_phat_minus_d, self.q1_q]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }

    /// `(description, value)` pairs.
    pub fn entries(&self) -> [(&'static str, f64); 5] {
        [
            ("orbit is the straight segment", self.orbit),
            ("mixed q p_hat Hessian vanishes", self.q_phat),
            ("mixed p_1 p_hat Hessian vanishes", self.p1_phat),
            ("vertical Hessian equals D", self.phat_phat_minus_d),
            ("q_1 row of the base Hessian vanishes", self.q1_q),
        ]
    }
}

/// Evaluates the normal-form conditions for `h_chart` at `n_samples` times in
/// `[-delta, delta]`. Failures to integrate are reported as infinite residuals.
pub fn verify_normal_form(
    h_chart: &dyn Hamiltonian,
    delta: f64,
    signs: &DVector<f64>,
    n_samples: usize,
    cfg: &FlowConfig,
) -> NormalFormResiduals {
    let n = h_chart.base_dim();
    let d = n - 1;
    let ns = n_samples.max(2);
    let times: Vec<f64> = (0..ns).map(|i| -delta + 2.0 * delta * i as f64 / (ns - 1) as f64).collect();
    let origin = DVector::zeros(2 * n);
    let fwd = flow_solution(h_chart, &origin, 0.0, delta, cfg);
    let bwd = flow_solution(h_chart, &origin, 0.0, -delta, cfg);
    let dd = DMatrix::from_diagonal(signs);
    let mut r = NormalFormResiduals {
        orbit: 0.0,
        q_phat: 0.0,
        p1_phat: 0.0,
        phat_phat_minus_d: 0.0,
        q1_q: 0.0,
    };
    for &t in &times {
        let sol = if t >= 0.0 { &fwd } else { &bwd };
        r.orbit = r.orbit.max(match sol {
            Ok(s) => (s.eval(t) - segment_point(n, t)).amax(),
            Err(_) => f64::INFINITY,
        });
        let hs = match h_chart.try_hessian(&segment_point(n, t)) {
            Ok(hs) => hs,
            Err(_) => {
                r.q_phat = f64::INFINITY;
                continue;
            }
        };
        r.q_phat = r.q_phat.max(hs.view((0, n + 1), (n, d)).amax());
        r.p1_phat = r.p1_phat.max(hs.view((n, n + 1), (1, d)).amax());
        r.phat_phat_minus_d = r.phat_phat_minus_d.max((hs.view((n + 1, n + 1), (d, d)) - &dd).amax());
        r.q1_q = r.q1_q.max(hs.view((0, 0), (1, n)).amax());
    }
    r
}

/// The normal-form chart and its data `(D, K(t), a(t))`.
#[derive(Debug, Clone)]
pub struct NormalFormData {
    pub chart: FiberedChart,
    pub delta: f64,
    /// Diagonal of `D`, `+1` entries first.
    pub signs: DVector<f64>,
    /// `K(t) = d2_{q_hat q_hat} H(t e_1, 0)`.
    pub k: Curve,
    /// `a(t) = d2_{p_1 p_1} H(t e_1, 0)`.
    pub a: Curve,
    pub residuals: NormalFormResiduals,
    /// `max |M D M^T - A|` along the frame solution.
    pub congruence_residual: f64,
    /// `max |B - B^T|` along the frame solution.
    pub b_asymmetry: f64,
    /// The original point sent to the chart origin.
    pub x0: PhasePoint,
    /// Number of halvings of the requested `delta`.
    pub halvings: usize,
}

impl NormalFormData {
    pub fn d(&self) -> usize {
        self.signs.len()
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.signs)
    }

    pub fn k_at(&self, t: f64) -> DMatrix<f64> {
        let k = self.k.value(t);
        (&k + k.transpose()) * 0.5
    }

    pub fn a_at(&self, t: f64) -> f64 {
        self.a.scalar(t, 0)
    }

    /// Number of `-1` entries of `D`.
    pub fn negative_count(&self) -> usize {
        self.signs.iter().filter(|&&s| s < 0.0).count()
    }

    /// `H o Psi`.
    pub fn chart_hamiltonian<'a>(&'a self, h: &'a dyn Hamiltonian) -> ChartHamiltonian<'a> {
        self.chart.pullback(h)
    }

    /// Key-value text with `D`, sampled `K(t)`, `a(t)` and the residuals.
    pub fn to_text(&self, samples: usize) -> String {
        let mut s = String::new();
        let d = self.d();
        let _ = writeln!(s, "delta = {:.12e}", self.delta);
        let _ = writeln!(s, "halvings = {}", self.halvings);
        let signs: Vec<String> = self.signs.iter().map(|v| format!("{v:+.0}")).collect();
        let _ = writeln!(s, "D = diag({})", signs.join(", "));
        for (name, v) in self.residuals.entries() {
            let _ = writeln!(s, "residual {name} = {v:.3e}");
        }
        let _ = writeln!(s, "residual congruence M D M^T = A = {:.3e}", self.congruence_residual);
        let _ = writeln!(s, "residual asymmetry of B = {:.3e}", self.b_asymmetry);
        let _ = writeln!(s, "samples = {samples}");
        let ns = samples.max(2);
        for i in 0..ns {
            let t = -self.delta + 2.0 * self.delta * i as f64 / (ns - 1) as f64;
            let k = self.k_at(t);
            let entries: Vec<String> = (0..d)
                .flat_map(|r| (0..d).map(move |c| (r, c)))
                .map(|(r, c)| format!("{:.12e}", k[(r, c)]))
                .collect();
            let _ = writeln!(s, "t = {t:.12e} a = {:.12e} K = [{}]", self.a_at(t), entries.join(" "));
        }
        s
    }

    /// Section frame at chart time `t` whose basis is the image of the chart's
    /// transverse coordinates `(q_hat, p_hat)`. `orbit` must start at `x0` in
    /// the same time parametrization.
    pub fn chart_frame(&self, h: &dyn Hamiltonian, orbit: &PeriodicOrbit, t: f64) -> Result<SectionFrame> {
        let n = self.chart.base_dim();
        let d = n - 1;
        let jac = self.chart.jacobian(&segment_point(n, t));
        let mut basis = DMatrix::zeros(2 * n, 2 * d);
        for j in 0..d {
            basis.set_column(j, &jac.column(1 + j));
            basis.set_column(d + j, &jac.column(n + 1 + j));
        }
        let inv = jac.try_inverse().ok_or_else(|| Error::ConstructionFailure {
            step: "chart_frame".into(),
            detail: "chart Jacobian is singular".into(),
        })?;
        let normal = inv.row(0).transpose();
        SectionFrame::with_basis(h, orbit, t, normal, basis)
    }
}

fn try_build(h: &dyn Hamiltonian, x0: &PhasePoint, delta: f64, cfg: &NormalFormConfig) -> Result<NormalFormData> {
    let n = h.base_dim();
    let flow = &cfg.flow;
    let mut chart = FiberedChart::identity(n, h.domain());
    let straight = straighten_projection(h, x0, delta)?;
    chart.push_inner(straight.piece);
    chart.push_inner(vertical_normalization(straight.momentum));
    let piece = flowbox_normalization(&chart.pullback(h), delta)?;
    chart.push_inner(piece);
    let piece = shear_normalization(&chart.pullback(h), delta)?;
    chart.push_inner(piece);
    let diag = diagonalize_vertical_hessian(&chart.pullback(h), delta)?;
    chart.push_inner(diag.matrix_piece);
    chart.push_inner(diag.quadratic_piece);
    chart.delta = delta;
    chart.radius = delta;
    if diag.congruence_residual > 1e-8 || diag.b_asymmetry > 1e-10 {
        return Err(Error::ConstructionFailure {
            step: "diagonalize_vertical_hessian".into(),
            detail: format!(
                "frame solution residuals: congruence {:e}, asymmetry {:e}",
                diag.congruence_residual, diag.b_asymmetry
            ),
        });
    }
    let grid = segment_grid(delta)?;
    let hc = chart.pullback(h);
    let k = Curve::from_samples(grid, |t| Ok(hc.try_hessian(&segment_point(n, t))?.view((1, 1), (n - 1, n - 1)).into_owned()))?;
    let a = Curve::from_samples(grid, |t| Ok(DMatrix::from_element(1, 1, hc.try_hessian(&segment_point(n, t))?[(n, n)])))?;
    let residuals = verify_normal_form(&hc, delta, &diag.signs, cfg.n_verify, flow);
    if !residuals.passes(cfg.residual_tol) {
        return Err(Error::ConstructionFailure {
            step: "verify_normal_form".into(),
            detail: format!("largest residual {:e} exceeds {:e}", residuals.max(), cfg.residual_tol),
        });
    }
    Ok(NormalFormData {
        chart: chart.clone(),
        delta,
        signs: diag.signs,
        k,
        a,
        residuals,
        congruence_residual: diag.congruence_residual,
        b_asymmetry: diag.b_asymmetry,
        x0: x0.clone(),
        halvings: 0,
    })
}

/// Builds the normal-form chart around the orbit through `x0`, halving
/// `delta_request` until every step and the verification succeed.
pub fn build_normal_form(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    delta_request: f64,
    cfg: &NormalFormConfig,
) -> Result<NormalFormData> {
    if !(delta_request > 0.0) || !delta_request.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta_request}")));
    }
    if h.base_dim() < 2 {
        return Err(Error::InvalidArgument("normal form needs at least two base dimensions".into()));
    }
    let test = fiberwise_iso_energetic_test(h, x0, None);
    if !test.non_degenerate {
        return Err(Error::HypothesisViolation {
            step: "build_normal_form".into(),
            t: 0.0,
            detail: format!(
                "bordered fiber Hessian is degenerate at the base point (det {:e}, tol {:e})",
                test.det_value, test.tol
            ),
        });
    }
    let mut delta = delta_request;
    let mut last = None;
    let mut attempts = 0;
    for halvings in 0..=cfg.max_halvings {
        if halvings > 0 && delta < cfg.min_delta {
            break;
        }
        attempts = halvings;
        match try_build(h, x0, delta, cfg) {
            Ok(mut data) => {
                data.halvings = halvings;
                return Ok(data);
            }
            Err(Error::InvalidArgument(m)) => return Err(Error::InvalidArgument(m)),
            Err(e) => last = Some(e),
        }
        delta *= 0.5;
    }
    let (step, detail) = match last {
        Some(Error::ConstructionFailure { step, detail }) => (step, detail),
        Some(Error::HypothesisViolation { step, t, detail }) => {
            return Err(Error::HypothesisViolation {
                step,
                t,
                detail: format!("{detail} (persists after {attempts} halvings)"),
            })
        }
        Some(e) => ("build_normal_form".to_string(), e.to_string()),
        None => ("build_normal_form".to_string(), "no attempt made".to_string()),
    };
    Err(Error::ConstructionFailure {
        step,
        detail: format!("{detail} (after {attempts} halvings, last delta {:e})", delta * 2.0),
    })
}
