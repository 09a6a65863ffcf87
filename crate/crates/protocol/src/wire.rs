//! JSON messages exchanged between browser, server and phone, and the
//! length-prefixed framing used on the device channel.
//!
//! Every message is a JSON object whose `type` field names the variant in
//! SCREAMING_SNAKE_CASE. Binary fields travel as standard padded base64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use earshot_core::ScoringPolicy;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::session::SessionState;
use crate::{ProtocolError, Result};

/// Upper bound on a single frame; a 3 s recording at 48 kHz is well under 1 MiB.
pub const MAX_FRAME: usize = 16 << 20;

/// Recording length requested from both devices.
pub const RECORD_MS: u32 = 3000;

/// Hybrid-encrypted recording: a fresh symmetric key wrapped for the phone,
/// the payload nonce and the authenticated ciphertext.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedSample {
    #[serde(with = "b64")]
    pub wrapped_key: Vec<u8>,
    #[serde(with = "b64")]
    pub nonce: Vec<u8>,
    #[serde(with = "b64")]
    pub ciphertext: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    Enroll {
        username: String,
        password: String,
        phone_pubkey: String,
    },
    Enrolled {
        username: String,
        phone_pubkey: String,
        /// Base64 seed for fallback codes, returned once to the enrolling device.
        fallback_secret: String,
    },
    LoginInit {
        username: String,
        password: String,
    },
    LoginChallenge {
        session_id: String,
        phone_pubkey: String,
        record_ms: u32,
    },
    SampleUpload {
        session_id: String,
        #[serde(flatten)]
        sample: EncryptedSample,
    },
    FallbackCode {
        session_id: String,
        code: String,
    },
    SyncReq {
        t1: i64,
    },
    SyncResp {
        t1: i64,
        t2: i64,
        t3: i64,
    },
    Result {
        state: SessionState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    /// Device channel greeting; the signature covers username and timestamp.
    Hello {
        username: String,
        timestamp: i64,
        signature: String,
    },
    Challenge {
        session_id: String,
        record_ms: u32,
        /// Session creation time on the server clock.
        created_at: i64,
        freshness_ms: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        policy: Option<ScoringPolicy>,
    },
    Sample {
        session_id: String,
        #[serde(flatten)]
        sample: EncryptedSample,
    },
    Verdict {
        session_id: String,
        accepted: bool,
        reason: String,
        score: Option<f64>,
        signature: String,
    },
    /// The device is already handling a challenge.
    Busy {
        session_id: String,
    },
    Ack,
    Error {
        code: String,
        message: String,
    },
}

impl Message {
    pub fn error(e: &ProtocolError) -> Self {
        Message::Error {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("messages always serialize")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| ProtocolError::Malformed(e.to_string()))
    }
}

/// `u32` big-endian length followed by the JSON body.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let body = msg.to_json();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub async fn write_frame<W: AsyncWrite + Unpin>(w: &mut W, msg: &Message) -> std::io::Result<()> {
    w.write_all(&encode_frame(msg)).await?;
    w.flush().await
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the header.
pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R) -> Result<Option<Message>> {
    let mut header = [0u8; 4];
    match r.read_exact(&mut header).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME {
        return Err(ProtocolError::Malformed(format!("frame of {len} bytes")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).await?;
    Message::from_json(&body).map(Some)
}

pub fn b64_encode(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn b64_decode(s: &str) -> Result<Vec<u8>> {
    STANDARD
        .decode(s)
        .map_err(|e| ProtocolError::Malformed(format!("base64: {e}")))
}

pub(crate) mod b64 {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_layout() {
        let m = Message::LoginInit {
            username: "alice".into(),
            password: "pw".into(),
        };
        let v: serde_json::Value = serde_json::from_slice(&m.to_json()).unwrap();
        assert_eq!(v["type"], "LOGIN_INIT");
        assert_eq!(v["username"], "alice");
    }

    #[test]
    fn sample_fields_are_flat_base64() {
        let m = Message::SampleUpload {
            session_id: "s".into(),
            sample: EncryptedSample {
                wrapped_key: vec![1, 2, 3],
                nonce: vec![0; 12],
                ciphertext: vec![255],
            },
        };
        let v: serde_json::Value = serde_json::from_slice(&m.to_json()).unwrap();
        assert_eq!(v["type"], "SAMPLE_UPLOAD");
        assert_eq!(v["wrapped_key"], "AQID");
        assert_eq!(v["ciphertext"], "/w==");
        assert_eq!(Message::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn unit_variant_and_result() {
        assert_eq!(Message::Ack.to_json(), br#"{"type":"ACK"}"#);
        let r = Message::Result {
            state: SessionState::FallbackCode,
            reason: None,
        };
        assert_eq!(r.to_json(), br#"{"type":"RESULT","state":"FALLBACK_CODE"}"#);
    }

    #[test]
    fn bad_base64_is_malformed() {
        let raw =
            br#"{"type":"SAMPLE","session_id":"s","wrapped_key":"!!","nonce":"","ciphertext":""}"#;
        assert!(matches!(
            Message::from_json(raw),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[tokio::test]
    async fn frames_round_trip() {
        let msgs = [
            Message::SyncReq { t1: -5 },
            Message::Busy {
                session_id: "x".into(),
            },
            Message::Ack,
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).await.unwrap();
        }
        assert_eq!(&buf[..4], &(msgs[0].to_json().len() as u32).to_be_bytes());
        let mut r = buf.as_slice();
        for m in &msgs {
            assert_eq!(read_frame(&mut r).await.unwrap().as_ref(), Some(m));
        }
        assert_eq!(read_frame(&mut r).await.unwrap(), None);
    }

    #[tokio::test]
    async fn oversized_frame_is_refused() {
        let mut buf = ((MAX_FRAME + 1) as u32).to_be_bytes().to_vec();
        buf.extend_from_slice(b"{}");
        assert!(read_frame(&mut buf.as_slice()).await.is_err());
    }
}
