use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {value} outside of [{lo}, {hi}] for {what}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("timesteps must be strictly increasing (got {next} after {prev})")]
    NonMonotone { prev: f64, next: f64 },

    #[error("feature cache is empty")]
    EmptyCache,

    #[error("order-{order} forecast needs {needed} cached entries, have {have}")]
    InsufficientCache {
        order: usize,
        needed: usize,
        have: usize,
    },

    #[error("normal matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("fit produced non-finite coefficients")]
    NonFinite,

    #[error("forecaster has not been fitted")]
    Unfitted,

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
