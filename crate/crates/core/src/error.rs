//! Error type shared by all engine stages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient or integrand produced a non-finite value.
    #[error("non-finite value in {context} at point {point:?}")]
    NumericalDomain { context: String, point: Vec<f64> },

    /// A queried point left the grid's extrapolation band.
    #[error("point escapes grid on axis {axis}: {value} outside [{lo}, {hi}] (with extrapolation band)")]
    DomainEscape {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Simulated state became non-finite.
    #[error("path {path} blew up at t = {time}")]
    PathBlowup { path: usize, time: f64 },

    /// The PIDE stepper produced a non-finite field.
    #[error("PIDE solver diverged at time level {level} (t = {time})")]
    SolverDiverged { level: usize, time: f64 },

    /// A specification violates one of its structural invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Unknown preset family name.
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    /// Missing or ill-typed preset/configuration parameters.
    #[error("invalid parameters for '{family}': {detail}")]
    InvalidParams { family: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_params(family: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::InvalidParams {
            family: family.into(),
            detail: detail.into(),
        }
    }
}
