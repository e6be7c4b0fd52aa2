use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("{kind} is unsupported at alpha = {alpha}")]
    Unsupported { kind: String, alpha: f64 },

    #[error("invalid bound function: {0}")]
    InvalidBound(String),

    #[error("value {value} outside the support [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("sample needs at least 2 observations, got {0}")]
    TooFewObservations(usize),

    #[error("infeasible mass target {target} (capacity {capacity})")]
    Infeasible { target: f64, capacity: f64 },

    #[error("bisection failed to bracket the water level")]
    NonBracketing,

    #[error("{0} has no closed-form optimum to compare against")]
    KindMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
