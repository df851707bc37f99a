use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A numerical self-check failed (Hermiticity, orthonormality, norm drift, ...).
    #[error("numerical validation failed: {0}")]
    Validation(String),

    #[error("norm drift {drift:.3e} of state {state} at t = {time:.3} a.u. exceeds tolerance")]
    NormDrift { state: usize, time: f64, drift: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::NormDrift { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
