use thiserror::Error;

/// Errors produced by tensor algebra, graph construction and the fitting routines.
#[derive(Debug, Error)]
pub enum EdrError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),

    #[error("rank deficient operator: {0}")]
    RankDeficient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EdrError>;
