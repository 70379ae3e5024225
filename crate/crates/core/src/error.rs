use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent q = {0}")]
    InvalidExponent(f64),

    #[error("operation needs a nonzero function")]
    ZeroFunction,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid lattice set: {0}")]
    InvalidSet(String),

    #[error("certificate is not valid (margin {margin:e}, err {err:e})")]
    InvalidCertificate { margin: f64, err: f64 },

    #[error("quadrature did not converge: successive refinements {coarse:e} and {fine:e}")]
    NotConverged { coarse: f64, fine: f64 },

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("malformed decimal string {0:?}")]
    Decimal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
