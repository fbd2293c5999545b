use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("A + A^T is not positive definite (smallest symmetric eigenvalue {smallest_eigenvalue:e})")]
    NotPositiveDefinite { smallest_eigenvalue: f64 },

    #[error("grid or shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range (valid range 0..{len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite matrix exponential at mode {mode}; reduce dt or grid resolution")]
    PropagatorOverflow { mode: usize },

    #[error("non-finite reaction value at sample {sample}")]
    ReactionOverflow { sample: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
