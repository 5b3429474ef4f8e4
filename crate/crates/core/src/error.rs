use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("non-finite evaluation at x = {x:?}: {what}")]
    Evaluation { x: Vec<f64>, what: String },

    #[error("integration failed at t = {t}: {reason} (last good state {state:?})")]
    IntegrationFailure {
        t: f64,
        state: Vec<f64>,
        reason: String,
    },

    #[error("shooting did not converge after {iterations} iterations (residuals {history:?})")]
    NoConvergence { iterations: usize, history: Vec<f64> },

    #[error("section is tangent to the flow (transverse component {component:e})")]
    Tangency { component: f64 },

    #[error("hypothesis violated in {step} at t = {t}: {detail}")]
    HypothesisViolation {
        step: String,
        t: f64,
        detail: String,
    },

    #[error("normal-form construction failed in {step}: {detail}")]
    ConstructionFailure { step: String, detail: String },

    #[error("uncontrollable directions: rank {rank} of {target} ({} null directions)", null_directions.len())]
    Uncontrollable {
        rank: usize,
        target: usize,
        /// Unreachable directions, each a Hamiltonian matrix stored row-major.
        null_directions: Vec<Vec<f64>>,
    },

    #[error("potential transport failed: {0}")]
    Transport(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
