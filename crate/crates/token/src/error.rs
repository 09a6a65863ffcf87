use std::path::PathBuf;

use earshot_protocol::{ClientError, ProtocolError};
use thiserror::Error;

pub type Result<T, E = TokenError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Audio(#[from] earshot_core::Error),
    /// The server answered with an `ERROR` frame.
    #[error("server refused: {code}: {message}")]
    Refused { code: String, message: String },
    #[error("device channel closed")]
    Closed,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl TokenError {
    /// Wire error code, when the server supplied one.
    pub fn code(&self) -> Option<&str> {
        match self {
            TokenError::Refused { code, .. } => Some(code),
            TokenError::Client(c) => c.code(),
            TokenError::Protocol(p) => Some(p.code()),
            _ => None,
        }
    }
}
