use thiserror::Error;

/// Errors raised by problem evaluation, the least-squares kernel and the
/// experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty vector: dimension must be at least 1")]
    EmptyVector,

    #[error("known solution is not a root: |g(x*)| = {0:e}")]
    NotASolution(f64),

    #[error("degenerate denominator in closed-form coefficient: |r(q(x)) - r(x)| = {0:e}")]
    DegenerateDenominator(f64),

    #[error("least-squares system is malformed: {0}")]
    MalformedSystem(String),

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("problem has no known solution")]
    MissingSolution,

    #[error("not enough usable records: need at least {needed}, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("incompatible run specs: {0}")]
    Incompatible(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
