use thiserror::Error;

/// Failures surfaced to browsers and devices. Each maps to a stable wire code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("username already enrolled")]
    UsernameTaken,
    #[error("bad credentials")]
    BadCredentials,
    #[error("too many login attempts")]
    Throttled,
    #[error("unknown or expired session")]
    BadSession,
    #[error("session is in state {0}")]
    WrongState(&'static str),
    #[error("signature does not verify")]
    BadSignature,
    #[error("verification code rejected")]
    BadCode,
    #[error("payload does not decrypt")]
    DecryptFail,
    #[error("invalid device key: {0}")]
    InvalidKey(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::UsernameTaken => "USERNAME_TAKEN",
            ProtocolError::BadCredentials => "BAD_CREDENTIALS",
            ProtocolError::Throttled => "THROTTLED",
            ProtocolError::BadSession => "BAD_SESSION",
            ProtocolError::WrongState(_) => "WRONG_STATE",
            ProtocolError::BadSignature => "BAD_SIGNATURE",
            ProtocolError::BadCode => "BAD_CODE",
            ProtocolError::DecryptFail => "DECRYPT_FAIL",
            ProtocolError::InvalidKey(_) => "INVALID_KEY",
            ProtocolError::Malformed(_) => "MALFORMED",
            ProtocolError::Storage(_) => "STORAGE",
        }
    }
}

impl From<std::io::Error> for ProtocolError {
    fn from(e: std::io::Error) -> Self {
        ProtocolError::Storage(e.to_string())
    }
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;
