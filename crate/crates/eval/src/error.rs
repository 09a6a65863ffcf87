use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("missing audio file {0}")]
    MissingFile(PathBuf),
    #[error("unknown {field} label {value:?}")]
    UnknownLabel { field: &'static str, value: String },
    #[error("{path}: {source}")]
    Audio {
        path: PathBuf,
        source: earshot_core::Error,
    },
    #[error(transparent)]
    Core(#[from] earshot_core::Error),
    #[error("FAR needs impostor entries or at least two subjects")]
    SingleSubject,
    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),
    #[error("alpha {0} outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("nothing to evaluate: {0}")]
    Empty(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl EvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.into(),
            source,
        }
    }
}
