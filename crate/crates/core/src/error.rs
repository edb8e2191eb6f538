use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hilbert-space dimension {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("unsupported map parameters: {0}")]
    UnsupportedParameters(String),

    #[error("kernel inconsistency: {0}")]
    Inconsistent(String),

    #[error("too few points for a decay fit: {got} (need at least {need}); increase N or decrease the perturbation")]
    TooFewPoints { got: usize, need: usize },

    #[error("curve does not decay over the fit window (slope {0:.3e})")]
    NoDecay(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
