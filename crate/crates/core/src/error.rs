use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid Laplacian: {0}")]
    InvalidLaplacian(String),

    #[error("graph too large for exhaustive search: {n} nodes (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("insufficient nonzero eigenvalues: need {needed}, found {found}")]
    InsufficientSpectrum { needed: usize, found: usize },

    #[error("parse error: {0}")]
    Parse(String),
}
