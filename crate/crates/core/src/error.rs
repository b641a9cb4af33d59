use thiserror::Error;

/// Errors produced while building instances, geometry, or running the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric: |E[{row}][{col}] - E[{col}][{row}]| = {diff:e} exceeds tolerance")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("malformed instance: {0}")]
    Malformed(String),

    #[error("invalid solver parameter: {0}")]
    InvalidParams(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large for enumeration: {size} feasible points exceed limit {limit}")]
    TooLarge { size: u128, limit: u128 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
