use thiserror::Error;

/// Errors raised by the coding-length toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid distortion {0}: epsilon must be finite and > 0")]
    InvalidDistortion(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NotPositiveSemidefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid group id {0}")]
    InvalidGroup(usize),

    #[error("too many samples for exhaustive search: {m} > {max}")]
    TooManySamples { m: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires hard (0/1) membership")]
    HardLabelsRequired,

    #[error("invalid mixture spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::InvalidDistortion(_) => "InvalidDistortion",
            Error::NotPositiveSemidefinite { .. } => "NotPositiveSemidefinite",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::InvalidGroup(_) => "InvalidGroup",
            Error::TooManySamples { .. } => "TooManySamples",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::HardLabelsRequired => "HardLabelsRequired",
            Error::InvalidSpec(_) => "InvalidSpec",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
