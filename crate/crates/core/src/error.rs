use thiserror::Error;

pub type Result<T> = std::result::Result<T, ZitsError>;

#[derive(Debug, Error)]
pub enum ZitsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("hurdle parameters (pi0 = {pi0}, lambda = {lambda}) are not representable as a zero-inflated Poisson: pi0 < exp(-lambda)")]
    NonRepresentable { pi0: f64, lambda: f64 },

    #[error("non-finite value at cell ({i}, {j}, {k}): {what}")]
    NonFinite {
        i: usize,
        j: usize,
        k: usize,
        what: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
