use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed WAV data: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("sampling rate {fs} Hz cannot represent band edge {edge_hz:.1} Hz")]
    FsTooLow { fs: u32, edge_hz: f64 },
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sampling rates differ: {0} Hz vs {1} Hz")]
    FsMismatch(u32, u32),
    #[error("recordings overlap for {overlap_ms} ms, need at least {required_ms} ms")]
    DurationMismatch { overlap_ms: i64, required_ms: i64 },
    #[error("invalid band set: {0}")]
    InvalidBandSet(String),
    #[error("invalid audio sample: {0}")]
    InvalidSample(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("no policy tabulated for alpha = {0}")]
    UntabulatedAlpha(f64),
    #[error("no synchronization rounds")]
    NoRounds,
    #[error("invalid synchronization round: {0}")]
    InvalidRound(String),
}
