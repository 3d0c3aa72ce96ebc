use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Every variant renders as a single line so the binary can report it as a
/// one-line diagnostic.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] softcca_core::Error),

    #[error("config error in {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("checkpoint and data are incompatible: {0}")]
    Compatibility(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {msg}")]
    Csv { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn checkpoint(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Checkpoint {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
