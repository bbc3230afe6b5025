use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: need at least {needed} values, found {found}")]
    TooShort {
        path: PathBuf,
        needed: usize,
        found: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "quadrature did not converge: achieved relative error {achieved:.3e}, wanted {wanted:.3e}"
    )]
    Quadrature { achieved: f64, wanted: f64 },

    #[error("propagation failed at t = {time_fs} fs: {reason}")]
    Propagation { time_fs: f64, reason: String },

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
