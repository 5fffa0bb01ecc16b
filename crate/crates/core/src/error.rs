use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong dimension, bad label set, unnormalized state...
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An algebraic identity that must hold did not, beyond tolerance.
    #[error("identity `{name}` violated: lhs = {lhs:.12e}, rhs = {rhs:.12e}, |diff| = {diff:.3e} > {tol:.1e}")]
    Identity {
        name: &'static str,
        lhs: f64,
        rhs: f64,
        diff: f64,
        tol: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
