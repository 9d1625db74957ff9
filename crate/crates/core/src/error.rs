use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature failed on [{lower}, {upper}]: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("step size underflow at t = {last_good_time}")]
    StepUnderflow { last_good_time: f64 },

    #[error("step budget of {max_steps} exhausted at t = {last_good_time}")]
    StepBudget {
        max_steps: usize,
        last_good_time: f64,
    },

    #[error("coefficient vanishes on ({lower}, {upper}]; reciprocal primitive undefined")]
    VanishingCoefficient { lower: f64, upper: f64 },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("profile cannot be classified: {0}")]
    Unclassifiable(String),

    #[error("interval leaves the elliptic part at t = {crossing_time}")]
    LeavesEllipticPart { crossing_time: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

impl LabError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
