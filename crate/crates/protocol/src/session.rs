//! Login session state machine and per-username throttling.
//!
//! ```text
//! PASSWORD_OK ─▶ AWAITING_SAMPLES ─▶ AWAITING_VERDICT ─┬─▶ ACCEPTED
//!                      ▲                               ├─▶ (reject, retries left) ─┘
//!                      └───────────────────────────────┘
//!                                                      └─▶ FALLBACK_CODE ─┬─▶ ACCEPTED
//!                                                                         └─▶ REJECTED
//! ```
//!
//! The table only tracks states. Password, signature and code checks happen in
//! [`crate::AuthService`] before it asks the table to move.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{ProtocolError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    PasswordOk,
    AwaitingSamples,
    AwaitingVerdict,
    Accepted,
    Rejected,
    FallbackCode,
}

impl SessionState {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionState::PasswordOk => "PASSWORD_OK",
            SessionState::AwaitingSamples => "AWAITING_SAMPLES",
            SessionState::AwaitingVerdict => "AWAITING_VERDICT",
            SessionState::Accepted => "ACCEPTED",
            SessionState::Rejected => "REJECTED",
            SessionState::FallbackCode => "FALLBACK_CODE",
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, SessionState::Accepted | SessionState::Rejected)
    }
}

impl std::fmt::Display for SessionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Scoring attempts per session before falling back to a code.
    pub retry_limit: u32,
    /// Wrong fallback codes per session before rejecting.
    pub code_attempts: u32,
    /// Logins per username inside `throttle_window_ms`.
    pub throttle_logins: usize,
    pub throttle_window_ms: i64,
    pub session_ttl_ms: i64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            retry_limit: 3,
            code_attempts: 3,
            throttle_logins: 5,
            throttle_window_ms: 60_000,
            session_ttl_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoginSession {
    pub session_id: String,
    pub username: String,
    pub state: SessionState,
    pub created_at: i64,
    pub expires_at: i64,
    pub attempt_count: u32,
    pub code_failures: u32,
    pub last_reason: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SessionTable {
    limits: Limits,
    sessions: HashMap<String, LoginSession>,
    logins: HashMap<String, VecDeque<i64>>,
}

impl SessionTable {
    pub fn new(limits: Limits) -> Self {
        Self {
            limits,
            ..Default::default()
        }
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// Counts a login attempt for `username`; fails once the window is full.
    pub fn note_login(&mut self, username: &str, now: i64) -> Result<()> {
        let window = self.logins.entry(username.to_string()).or_default();
        while window
            .front()
            .is_some_and(|&t| now - t >= self.limits.throttle_window_ms)
        {
            window.pop_front();
        }
        window.push_back(now);
        if window.len() > self.limits.throttle_logins {
            Err(ProtocolError::Throttled)
        } else {
            Ok(())
        }
    }

    /// Creates a session for a verified password.
    pub fn open(&mut self, session_id: &str, username: &str, now: i64) -> &LoginSession {
        self.sessions.insert(
            session_id.to_string(),
            LoginSession {
                session_id: session_id.to_string(),
                username: username.to_string(),
                state: SessionState::PasswordOk,
                created_at: now,
                expires_at: now + self.limits.session_ttl_ms,
                attempt_count: 0,
                code_failures: 0,
                last_reason: None,
            },
        );
        &self.sessions[session_id]
    }

    /// Live session, purging it first if expired.
    pub fn get(&mut self, session_id: &str, now: i64) -> Result<&LoginSession> {
        self.live(session_id, now).map(|s| &*s)
    }

    fn live(&mut self, session_id: &str, now: i64) -> Result<&mut LoginSession> {
        if self
            .sessions
            .get(session_id)
            .is_some_and(|s| now > s.expires_at)
        {
            self.sessions.remove(session_id);
        }
        self.sessions
            .get_mut(session_id)
            .ok_or(ProtocolError::BadSession)
    }

    fn expect(&mut self, id: &str, now: i64, want: SessionState) -> Result<&mut LoginSession> {
        let s = self.live(id, now)?;
        if s.state != want {
            return Err(ProtocolError::WrongState(s.state.as_str()));
        }
        Ok(s)
    }

    /// The phone has been asked to record.
    pub fn challenge_sent(&mut self, id: &str, now: i64) -> Result<()> {
        self.expect(id, now, SessionState::PasswordOk)?.state = SessionState::AwaitingSamples;
        Ok(())
    }

    /// The computer's recording has been forwarded to the phone.
    pub fn sample_submitted(&mut self, id: &str, now: i64) -> Result<()> {
        self.expect(id, now, SessionState::AwaitingSamples)?.state = SessionState::AwaitingVerdict;
        Ok(())
    }

    /// Applies an authenticated verdict. A rejection loops back for another
    /// recording until `retry_limit` scoring attempts have been spent.
    pub fn verdict(
        &mut self,
        id: &str,
        now: i64,
        accepted: bool,
        reason: &str,
    ) -> Result<SessionState> {
        let retry_limit = self.limits.retry_limit;
        let ttl = self.limits.session_ttl_ms;
        let s = self.expect(id, now, SessionState::AwaitingVerdict)?;
        s.attempt_count += 1;
        s.last_reason = Some(reason.to_string());
        s.state = if accepted {
            SessionState::Accepted
        } else if s.attempt_count < retry_limit {
            SessionState::AwaitingSamples
        } else {
            s.expires_at = now + ttl;
            SessionState::FallbackCode
        };
        Ok(s.state)
    }

    /// Audio verification is unavailable for this session.
    pub fn fall_back(&mut self, id: &str, now: i64, reason: &str) -> Result<()> {
        let ttl = self.limits.session_ttl_ms;
        let s = self.live(id, now)?;
        if s.state.is_final() {
            return Err(ProtocolError::WrongState(s.state.as_str()));
        }
        s.state = SessionState::FallbackCode;
        s.last_reason = Some(reason.to_string());
        s.expires_at = now + ttl;
        Ok(())
    }

    /// Applies a checked fallback code.
    pub fn code_entered(&mut self, id: &str, now: i64, valid: bool) -> Result<SessionState> {
        let code_attempts = self.limits.code_attempts;
        let s = self.expect(id, now, SessionState::FallbackCode)?;
        if valid {
            s.state = SessionState::Accepted;
            s.last_reason = Some("CODE".into());
            return Ok(s.state);
        }
        s.code_failures += 1;
        if s.code_failures >= code_attempts {
            s.state = SessionState::Rejected;
            s.last_reason = Some("BAD_CODE".into());
        }
        Err(ProtocolError::BadCode)
    }

    pub fn sweep(&mut self, now: i64) {
        self.sessions.retain(|_, s| now <= s.expires_at);
        let window = self.limits.throttle_window_ms;
        self.logins
            .retain(|_, w| w.back().is_some_and(|&t| now - t < window));
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn sessions(&self) -> impl Iterator<Item = &LoginSession> {
        self.sessions.values()
    }
}
