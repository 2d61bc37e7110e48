//! Error type shared by every module of the laboratory.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("convexity violation: {0}")]
    Convexity(String),

    #[error("non-integrable density: {0}")]
    NonIntegrable(String),

    #[error("condition (K) failure: {0}")]
    ConditionK(String),

    #[error("B too small: chi'(0) = {chi_prime_zero} > 1, try B = {suggested_b}")]
    BTooSmall {
        chi_prime_zero: f64,
        suggested_b: f64,
    },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("normalization violated: {0}")]
    Normalization(String),

    #[error("degenerate Moser schedule: {0}")]
    DegenerateSchedule(String),

    #[error("not converged after {iterations} iterations, last residual {residual:.3e}")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("damping failure: {0}")]
    DampingFailure(String),

    #[error("cone violation: {0}")]
    ConeViolation(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::InvalidInput(_) => "invalid-input",
            LabError::OutOfDomain(_) => "out-of-domain",
            LabError::Convexity(_) => "convexity",
            LabError::NonIntegrable(_) => "non-integrable",
            LabError::ConditionK(_) => "condition-k",
            LabError::BTooSmall { .. } => "b-too-small",
            LabError::Infeasible(_) => "infeasible",
            LabError::GridMismatch(_) => "grid-mismatch",
            LabError::Normalization(_) => "normalization",
            LabError::DegenerateSchedule(_) => "degenerate-schedule",
            LabError::MaxIterations { .. } => "max-iterations",
            LabError::DampingFailure(_) => "damping-failure",
            LabError::ConeViolation(_) => "cone-violation",
            LabError::Range(_) => "range",
            LabError::Precondition(_) => "precondition",
            LabError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
