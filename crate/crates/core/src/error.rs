use thiserror::Error;

/// Errors raised by the mechanism laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} agents, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("quality function `{label}` evaluated outside its domain at {at}")]
    OutOfDomain { label: String, at: f64 },

    #[error("agent {agent} reported {report} above its true type {truth}")]
    OverReport { agent: usize, report: f64, truth: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("allocation family is empty")]
    EmptyFamily,

    #[error("valuation `{0}` provides no derivative support")]
    NotDifferentiable(String),

    #[error("instance too large for brute force: {0}")]
    InstanceTooLarge(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
