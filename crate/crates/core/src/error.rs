use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("multiplier is not finite at wavenumber ({:.6}, {:.6}, {:.6})", .k[0], .k[1], .k[2])]
    NonFiniteSymbol { k: [f64; 3] },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("simulation aborted at t = {time:.6} (step {step}): {reason}")]
    Aborted { time: f64, step: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
