//! Builds the Hamiltonian, orbit point and period named by the config.

use std::sync::Arc;

use bumpy_core::geometry::{
    AffineMatrixField, ChartDomain, DerivativeMode, Hamiltonian, HamiltonianModel, PhasePoint, QuadraticPotential,
};
use bumpy_core::zoo;

use crate::config::{ModelKind, ModelSpec, OrbitSpec};
use crate::Failure;

pub struct Loaded {
    pub name: String,
    /// Resolved parameters as `key = value` pairs.
    pub params: Vec<(&'static str, String)>,
    pub model: HamiltonianModel,
    pub x0: Option<PhasePoint>,
    pub period: Option<f64>,
}

fn entry(e: zoo::ZooEntry, params: Vec<(&'static str, String)>) -> Loaded {
    Loaded {
        name: e.name.to_string(),
        params,
        model: e.model,
        x0: Some(e.x0),
        period: Some(e.period),
    }
}

fn p(key: &'static str, v: impl ToString) -> (&'static str, String) {
    (key, v.to_string())
}

pub fn load(spec: &ModelSpec, orbit: &OrbitSpec) -> Result<Loaded, Failure> {
    let cfg_err = |e: bumpy_core::Error| Failure::Config(format!("[model]: {e}"));
    let mut loaded = match &spec.kind {
        ModelKind::Harmonic { omega } => entry(zoo::harmonic(*omega), vec![p("omega", omega)]),
        ModelKind::AnisotropicHarmonic { a, b } => {
            entry(zoo::anisotropic_harmonic(*a, *b), vec![p("a", a), p("b", b)])
        }
        ModelKind::NonconvexD1 => entry(zoo::nonconvex_d1(), vec![]),
        ModelKind::NonconvexD2 => entry(zoo::nonconvex_d2(), vec![]),
        ModelKind::PendulumWell { d, kappa, mu, amplitude } => entry(
            zoo::pendulum_well(*d, *kappa, *mu, *amplitude),
            vec![p("d", d), p("kappa", kappa), p("mu", mu), p("amplitude", amplitude)],
        ),
        ModelKind::PendulumRotation { d, kappa, p1 } => entry(
            zoo::pendulum_rotation(*d, *kappa, *p1),
            vec![p("d", d), p("kappa", kappa), p("p1", p1)],
        ),
        ModelKind::MomentumLinear { d } => entry(zoo::momentum_linear(*d), vec![p("d", d)]),
        ModelKind::LorentzTorus => entry(zoo::lorentz_torus(), vec![]),
        ModelKind::FigureEight => entry(zoo::figure_eight(), vec![]),
        ModelKind::FreeParticle { d } => entry(zoo::free_particle(*d), vec![p("d", d)]),
        ModelKind::Quadratic {
            natural,
            g,
            slopes,
            v_const,
            v_linear,
            v_quadratic,
            periods,
        } => {
            let field = Arc::new(AffineMatrixField {
                g0: g.clone(),
                slopes: slopes.clone(),
            });
            let v = Arc::new(QuadraticPotential::new(*v_const, v_linear.clone(), v_quadratic.clone()));
            let domain = ChartDomain::with_periods(periods.clone());
            let model = if *natural {
                HamiltonianModel::natural(field, v, domain)
            } else {
                HamiltonianModel::fiberwise_quadratic(field, v, domain)
            }
            .map_err(cfg_err)?;
            Loaded {
                name: if *natural { "natural" } else { "fiberwise-quadratic" }.to_string(),
                params: vec![
                    p("g", format!("{:?}", bumpy_core::linalg::row_major(g))),
                    p("v_const", v_const),
                    p("v_linear", format!("{:?}", v_linear.as_slice())),
                    p("v_quadratic", format!("{:?}", bumpy_core::linalg::row_major(v_quadratic))),
                ],
                model,
                x0: None,
                period: None,
            }
        }
    };
    if spec.finite_differences {
        loaded.model = loaded.model.clone().with_derivative_mode(DerivativeMode::central_default());
        loaded.params.push(p("derivatives", "central"));
    }
    if let Some(x) = &orbit.x0 {
        let n = loaded.model.domain().base_dim();
        if x.len() != 2 * n {
            return Err(Failure::Config(format!("[orbit] x0: expected {} entries, got {}", 2 * n, x.len())));
        }
        loaded.x0 = Some(PhasePoint::from_slice(x).map_err(|e| Failure::Config(format!("[orbit] x0: {e}")))?);
    }
    if orbit.period.is_some() {
        loaded.period = orbit.period;
    }
    Ok(loaded)
}

impl Loaded {
    pub fn describe(&self) -> String {
        if self.params.is_empty() {
            return self.name.clone();
        }
        let ps: Vec<String> = self.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        format!("{} ({})", self.name, ps.join(", "))
    }

    pub fn x0(&self) -> Result<&PhasePoint, Failure> {
        self.x0
            .as_ref()
            .ok_or_else(|| Failure::Config(format!("model {} needs [orbit] x0", self.name)))
    }

    pub fn period(&self) -> Result<f64, Failure> {
        self.period
            .ok_or_else(|| Failure::Config(format!("model {} needs [orbit] period", self.name)))
    }
}
