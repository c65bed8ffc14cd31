use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid array: {0}")]
    InvalidArray(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// `K J_e Kᵀ` (or the gain block `J11`) is not safely invertible: the target
    /// position is not identifiable with the given beam covariance.
    #[error("singular equivalent Fisher information (condition number {condition:e})")]
    SingularEfim { condition: f64 },

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("monopulse weight alpha = {0} outside the open interval (0, 1)")]
    InvalidAlpha(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
