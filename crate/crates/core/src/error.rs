use thiserror::Error;

/// Errors raised by the solver, model and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mapping produced a non-finite value at component {index} (iteration {iteration})")]
    NonFinite { index: usize, iteration: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },

    #[error("scenario schema error: {0}")]
    Schema(String),

    #[error("unknown service id {0}")]
    UnknownService(usize),

    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("all {0} SAFP restarts failed to converge")]
    AllRestartsFailed(usize),

    #[error("brute-force search supports at most {max} services, got {got}")]
    ProblemTooLarge { max: usize, got: usize },

    #[error("{what} did not converge")]
    NotConverged { what: &'static str },

    #[error("{failed} of {total} Monte Carlo trials failed (limit is 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn scenario(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidScenario { field: field.into(), reason: reason.into() }
    }
}
