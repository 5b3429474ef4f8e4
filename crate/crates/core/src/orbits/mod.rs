//! Periodic orbits, neat times, restricted return maps and the degeneracy locus.

mod classify;
mod neat;
mod section;
mod shooting;
mod sigma;

pub use classify::{classify_orbit, OrbitClassification};
pub use neat::{neat_predicate, neat_times, NeatConfig, NeatTimes};
pub use section::{orbit_nondegenerate, restricted_return_map, NondegeneracyVerdict, SectionFrame};
pub use shooting::{
    find_periodic_orbit, minimal_period, EnergyPin, MinimalPeriod, ShootingConfig,
    ShootingDiagnostics,
};
pub use sigma::{sigma_scan, SigmaEvent, SigmaEventKind};

use nalgebra::DVector;

use crate::error::Result;
use crate::flow::{integrate_flow, FlowConfig, Trajectory};
use crate::geometry::{ChartDomain, Hamiltonian, PhasePoint};

/// A closed orbit `theta(t) = phi^t(x0)`, `theta(T) = x0` modulo the chart's
/// periodic coordinates.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub x0: PhasePoint,
    pub period: f64,
    pub minimal_period: f64,
    pub multiplicity: usize,
    pub energy: f64,
    pub samples: Trajectory,
    pub closure_residual: f64,
    pub domain: ChartDomain,
    pub flow_config: FlowConfig,
    pub diagnostics: Option<ShootingDiagnostics>,
}

impl PeriodicOrbit {
    /// Wraps a known periodic point without any Newton correction. The
    /// minimal period is taken to be `period`.
    pub fn from_known(
        h: &dyn Hamiltonian,
        x0: PhasePoint,
        period: f64,
        cfg: &FlowConfig,
    ) -> Result<Self> {
        let samples = integrate_flow(h, &x0, [0.0, period], cfg)?;
        let domain = h.domain();
        let closure_residual = domain.phase_distance(samples.final_state(), &x0.to_vector());
        Ok(Self {
            energy: h.value(&x0.to_vector()),
            x0,
            period,
            minimal_period: period,
            multiplicity: 1,
            samples,
            closure_residual,
            domain,
            flow_config: *cfg,
            diagnostics: None,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.x0.base_dim()
    }

    /// `theta(t)` for any real `t` (reduced modulo the minimal period).
    pub fn state(&self, t: f64) -> DVector<f64> {
        let tm = self.minimal_period;
        let k = (t / tm).floor();
        let s = t - k * tm;
        let mut x = self.samples.state(s);
        // Re-lift so that consecutive revolutions stay continuous on
        // periodic coordinates.
        if k != 0.0 {
            let shift = self.samples.state(tm) - self.x0.to_vector();
            let mut wrapped = shift.clone();
            self.domain.wrap_phase_delta(&mut wrapped);
            x += (shift - wrapped) * k;
        }
        x
    }

    /// Base projection `Q(t)`.
    pub fn base_point(&self, t: f64) -> DVector<f64> {
        let n = self.base_dim();
        self.state(t).rows(0, n).into_owned()
    }
}
