use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("n = {n} exceeds the enumeration bound of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("regular graph generation failed after {0} attempts")]
    GenerationFailed(usize),

    #[error("isolated node {0}")]
    IsolatedNode(usize),
}
