use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The operation needs `R < C`.
    #[error("rate {rate} nats is not below capacity {capacity} nats")]
    RateAboveCapacity { rate: f64, capacity: f64 },

    #[error("dense design matrix needs {required} bytes, cap is {cap} bytes")]
    MemoryCap { required: u64, cap: u64 },

    #[error("state evolution did not converge after {iterations} iterations (x = {x})")]
    NonConvergence { iterations: usize, x: f64 },

    /// A mathematical precondition of a bound was violated.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numeric failure at iteration {iteration}: {reason}")]
    NumericFailure { iteration: usize, reason: String },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
