//! HTTP client for the browser side of a login, used by tests, the
//! evaluation tools and scripted logins.

use std::time::{SystemTime, UNIX_EPOCH};

use earshot_core::{estimate_offset, AudioSample, ClockOffset, SyncRound};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::DevicePublicKey;
use crate::payload::encode_payload;
use crate::session::SessionState;
use crate::wire::{EncryptedSample, Message};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{code} ({status}): {message}")]
    Server {
        status: u16,
        code: String,
        message: String,
    },
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected reply: {0}")]
    Unexpected(String),
}

impl ClientError {
    /// Wire error code for server-side failures.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Server { code, .. } => Some(code),
            _ => None,
        }
    }
}

impl From<reqwest::Error> for ClientError {
    fn from(e: reqwest::Error) -> Self {
        ClientError::Transport(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginChallenge {
    pub session_id: String,
    pub phone_pubkey: String,
    pub record_ms: u32,
}

fn local_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct BrowserClient {
    http: reqwest::Client,
    base: String,
}

impl BrowserClient {
    /// `base_url` like `http://127.0.0.1:8080`.
    pub fn new(base_url: &str) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base_url.trim_end_matches('/').to_string(),
        }
    }

    async fn decode(resp: reqwest::Response) -> Result<Message, ClientError> {
        let status = resp.status().as_u16();
        let bytes = resp.bytes().await?;
        let msg = Message::from_json(&bytes).map_err(|e| ClientError::Unexpected(e.to_string()))?;
        match msg {
            Message::Error { code, message } => Err(ClientError::Server {
                status,
                code,
                message,
            }),
            m => Ok(m),
        }
    }

    async fn post(&self, path: &str, msg: &Message) -> Result<Message, ClientError> {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(msg.to_json())
            .send()
            .await?;
        Self::decode(resp).await
    }

    /// Registers a device key; returns the base64 fallback-code seed.
    pub async fn enroll(
        &self,
        username: &str,
        password: &str,
        phone_pubkey: &str,
    ) -> Result<String, ClientError> {
        let msg = Message::Enroll {
            username: username.into(),
            password: password.into(),
            phone_pubkey: phone_pubkey.into(),
        };
        match self.post("/api/enroll", &msg).await? {
            Message::Enrolled {
                fallback_secret, ..
            } => Ok(fallback_secret),
            m => Err(ClientError::Unexpected(format!("{m:?}"))),
        }
    }

    pub async fn login(
        &self,
        username: &str,
        password: &str,
    ) -> Result<LoginChallenge, ClientError> {
        let msg = Message::LoginInit {
            username: username.into(),
            password: password.into(),
        };
        match self.post("/api/login", &msg).await? {
            Message::LoginChallenge {
                session_id,
                phone_pubkey,
                record_ms,
            } => Ok(LoginChallenge {
                session_id,
                phone_pubkey,
                record_ms,
            }),
            m => Err(ClientError::Unexpected(format!("{m:?}"))),
        }
    }

    /// Runs `rounds` four-timestamp exchanges and estimates the server offset.
    pub async fn sync(&self, rounds: usize) -> Result<ClockOffset, ClientError> {
        let mut collected = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let t1 = local_ms();
            let reply = self.post("/api/sync", &Message::SyncReq { t1 }).await?;
            let t4 = local_ms();
            if let Message::SyncResp { t1: echo, t2, t3 } = reply {
                if echo == t1 {
                    if let Ok(r) = SyncRound::new(t1, t2, t3, t4) {
                        collected.push(r);
                    }
                }
            }
        }
        estimate_offset(&collected).map_err(|e| ClientError::Unexpected(e.to_string()))
    }

    /// Encrypts `recording` for the phone and uploads it.
    pub async fn upload<R: RngCore + CryptoRng>(
        &self,
        challenge: &LoginChallenge,
        recording: &AudioSample,
        rng: &mut R,
    ) -> Result<(), ClientError> {
        let pk = DevicePublicKey::from_base64(&challenge.phone_pubkey)
            .map_err(|e| ClientError::Unexpected(e.to_string()))?;
        let sample = pk.seal(&encode_payload(recording), rng);
        self.upload_sealed(&challenge.session_id, sample).await
    }

    /// Uploads an already sealed recording.
    pub async fn upload_sealed(
        &self,
        session_id: &str,
        sample: EncryptedSample,
    ) -> Result<(), ClientError> {
        let msg = Message::SampleUpload {
            session_id: session_id.into(),
            sample,
        };
        match self.post("/api/sample", &msg).await? {
            Message::Ack => Ok(()),
            m => Err(ClientError::Unexpected(format!("{m:?}"))),
        }
    }

    /// Session state, waiting up to `wait_ms` for it to leave `after`.
    pub async fn result(
        &self,
        session_id: &str,
        after: Option<SessionState>,
        wait_ms: u64,
    ) -> Result<(SessionState, Option<String>), ClientError> {
        let mut url = format!("{}/api/result/{session_id}?wait_ms={wait_ms}", self.base);
        if let Some(s) = after {
            url.push_str(&format!("&after={}", s.as_str()));
        }
        match Self::decode(self.http.get(url).send().await?).await? {
            Message::Result { state, reason } => Ok((state, reason)),
            m => Err(ClientError::Unexpected(format!("{m:?}"))),
        }
    }

    pub async fn fallback(
        &self,
        session_id: &str,
        code: &str,
    ) -> Result<SessionState, ClientError> {
        let msg = Message::FallbackCode {
            session_id: session_id.into(),
            code: code.into(),
        };
        match self.post("/api/fallback", &msg).await? {
            Message::Result { state, .. } => Ok(state),
            m => Err(ClientError::Unexpected(format!("{m:?}"))),
        }
    }

    /// Fetches `path` relative to the server root.
    pub async fn get_raw(&self, path: &str) -> Result<(u16, Vec<u8>), ClientError> {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await?;
        let status = resp.status().as_u16();
        Ok((status, resp.bytes().await?.to_vec()))
    }
}
