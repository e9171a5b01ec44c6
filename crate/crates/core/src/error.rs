//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A config key is missing, unknown, malformed or out of range.
    #[error("config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    /// An argument violates an operation precondition.
    #[error("{0}")]
    Precondition(String),

    /// Argument outside the domain of a pointwise operation.
    #[error("{0}")]
    Domain(String),

    /// The adaptive ODE step controller underflowed.
    #[error("ode integration failed: {0}")]
    OdeIntegration(String),

    /// Newton and the Picard fallback both failed to meet the residual
    /// tolerance; the caller is expected to halve the time step.
    #[error("nonlinear solve failed at t = {t}, dt = {dt}: residual {residual:e} > tol")]
    NonlinearSolve { t: f64, dt: f64, residual: f64 },

    /// Step halving was exhausted without an accepted step.
    #[error("time step halved {halvings} times without convergence at t = {t}")]
    StepHalvingExhausted { t: f64, halvings: usize },

    /// The common sweep grid does not resolve the smallest viscosity.
    #[error("grid under-resolves eps = {eps}: {nodes_in_band} nodes across the smoothing band, need >= {required}")]
    UnderResolved {
        eps: f64,
        nodes_in_band: usize,
        required: usize,
    },

    /// Tridiagonal elimination hit a vanishing pivot.
    #[error("tridiagonal solve: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A CSV file does not match the expected schema.
    #[error("csv: {0}")]
    CsvFormat(String),
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
