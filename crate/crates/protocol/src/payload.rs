//! Plaintext layout of an encrypted recording.
//!
//! ```text
//! "ESA1" | fs: u32 LE | captured_at: i64 LE | count: u32 LE | count × i16 LE
//! ```

use earshot_core::{quantize_i16, AudioSample};

use crate::{ProtocolError, Result};

pub const MAGIC: &[u8; 4] = b"ESA1";
const HEADER_LEN: usize = 4 + 4 + 8 + 4;

pub fn encode_payload(s: &AudioSample) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * s.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&s.fs().to_le_bytes());
    out.extend_from_slice(&s.captured_at().to_le_bytes());
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    for &v in s.pcm() {
        out.extend_from_slice(&quantize_i16(v).to_le_bytes());
    }
    out
}

pub fn decode_payload(bytes: &[u8], device_id: &str) -> Result<AudioSample> {
    let malformed = |m: &str| ProtocolError::Malformed(format!("sample payload: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(malformed("bad header"));
    }
    let fs = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let captured_at = i64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let count = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 2 * count {
        return Err(malformed("length does not match count"));
    }
    let pcm = body
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    AudioSample::new(pcm, fs, captured_at, device_id).map_err(|e| malformed(&e.to_string()))
}
