use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry on panel {panel}: {reason}")]
    DegenerateGeometry { panel: usize, reason: String },

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("quadrature did not converge: {0}")]
    NotConverged(String),

    #[error("matrix is singular to working precision (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("energy sequence is not increasing at level {level}: {prev} -> {next}")]
    NonMonotone { level: usize, prev: f64, next: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
