use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the warping library.
#[derive(Debug, Error)]
pub enum WarpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ambiguous input: {0}")]
    AmbiguousInput(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = WarpError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> WarpError {
    WarpError::InvalidArgument(msg.into())
}

pub(crate) fn internal(msg: impl Into<String>) -> WarpError {
    WarpError::Internal(msg.into())
}
