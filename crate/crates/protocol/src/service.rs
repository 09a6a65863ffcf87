//! The login service: enrollment, password check, challenge push, sample
//! proxying, verdict collection and fallback codes.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use earshot_core::ScoringPolicy;
use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use tokio::sync::watch;

use crate::crypto::{DevicePublicKey, PasswordDigester};
use crate::session::{Limits, LoginSession, SessionState, SessionTable};
use crate::store::{AttemptRecord, ClientMeta, Store, UserAccount};
use crate::wire::{b64_decode, b64_encode, EncryptedSample, Message, RECORD_MS};
use crate::{totp, ProtocolError, Result};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> i64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start_ms: i64) -> Self {
        Self(AtomicI64::new(start_ms))
    }

    pub fn set(&self, ms: i64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Delivers server→phone messages. Returns `false` when the device is unreachable.
pub trait PushSink: Send + Sync {
    fn push(&self, username: &str, msg: Message) -> bool;
}

/// Keeps every pushed message; for tests and offline tools.
#[derive(Debug, Default)]
pub struct MemoryPush {
    sent: Mutex<Vec<(String, Message)>>,
    offline: Mutex<Vec<String>>,
}

impl MemoryPush {
    pub fn take(&self) -> Vec<(String, Message)> {
        std::mem::take(&mut *self.sent.lock().unwrap())
    }

    pub fn set_offline(&self, username: &str) {
        self.offline.lock().unwrap().push(username.to_string());
    }
}

impl PushSink for MemoryPush {
    fn push(&self, username: &str, msg: Message) -> bool {
        if self.offline.lock().unwrap().iter().any(|u| u == username) {
            return false;
        }
        self.sent.lock().unwrap().push((username.to_string(), msg));
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub limits: Limits,
    /// Maximum age of a recording relative to session creation, checked by the phone.
    pub freshness_ms: i64,
    pub record_ms: u32,
    /// Scoring policy forwarded to phones with each challenge.
    pub policy: Option<ScoringPolicy>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            limits: Limits::default(),
            freshness_ms: 30_000,
            record_ms: RECORD_MS,
            policy: None,
        }
    }
}

pub struct AuthService {
    cfg: ServiceConfig,
    store: Arc<Store>,
    digester: PasswordDigester,
    clock: Arc<dyn Clock>,
    push: Arc<dyn PushSink>,
    table: Mutex<SessionTable>,
    rng: Mutex<StdRng>,
    changes: watch::Sender<u64>,
    /// Digest verified against when the username does not exist, so unknown
    /// users cost the same as wrong passwords.
    dummy_digest: OnceLock<String>,
}

impl AuthService {
    pub fn new(
        cfg: ServiceConfig,
        store: Arc<Store>,
        clock: Arc<dyn Clock>,
        push: Arc<dyn PushSink>,
    ) -> Self {
        Self {
            table: Mutex::new(SessionTable::new(cfg.limits)),
            cfg,
            store,
            dummy_digest: OnceLock::new(),
            digester: PasswordDigester::default(),
            clock,
            push,
            rng: Mutex::new(StdRng::from_entropy()),
            changes: watch::channel(0).0,
        }
    }

    pub fn with_digester(mut self, digester: PasswordDigester) -> Self {
        self.dummy_digest = OnceLock::new();
        self.digester = digester;
        self
    }

    /// Deterministic session ids and secrets; for tests.
    pub fn with_seed(self, seed: u64) -> Self {
        *self.rng.lock().unwrap() = StdRng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn now_ms(&self) -> i64 {
        self.clock.now_ms()
    }

    /// Bumps on every session change; for long-polling.
    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.changes.subscribe()
    }

    fn changed(&self) {
        self.changes.send_modify(|v| *v = v.wrapping_add(1));
    }

    fn record(
        &self,
        username: &str,
        session_id: Option<&str>,
        outcome: &str,
        reason: Option<&str>,
        score: Option<f64>,
        client: &ClientMeta,
    ) {
        let attempt = AttemptRecord {
            username: username.to_string(),
            timestamp: self.now_ms(),
            session_id: session_id.map(str::to_string),
            outcome: outcome.to_string(),
            reason: reason.map(str::to_string),
            score,
            client: client.clone(),
        };
        if let Err(e) = self.store.append_attempt(attempt) {
            tracing::error!(error = %e, "attempt log append failed");
        }
    }

    pub fn enroll(
        &self,
        username: &str,
        password: &str,
        phone_pubkey: &str,
    ) -> Result<UserAccount> {
        if username.is_empty() || username.len() > 256 {
            return Err(ProtocolError::Malformed("username".into()));
        }
        let pk = DevicePublicKey::from_base64(phone_pubkey)?;
        let (digest, secret) = {
            let mut rng = self.rng.lock().unwrap();
            let mut secret = [0u8; totp::SECRET_LEN];
            rng.fill_bytes(&mut secret);
            let mut salt_rng = StdRng::seed_from_u64(rng.next_u64());
            (self.digester.digest(password, &mut salt_rng), secret)
        };
        let account = UserAccount {
            username: username.to_string(),
            password_digest: digest,
            phone_pubkey: pk.to_base64(),
            fallback_secret: b64_encode(&secret),
            enrolled_at: self.now_ms(),
        };
        self.store.insert_account(account.clone())?;
        tracing::info!(username, "enrolled");
        Ok(account)
    }

    pub fn pubkey(&self, username: &str) -> Result<String> {
        self.store
            .account(username)
            .map(|a| a.phone_pubkey)
            .ok_or(ProtocolError::BadCredentials)
    }

    fn new_session_id(&self) -> String {
        let mut bytes = [0u8; 16];
        self.rng.lock().unwrap().fill_bytes(&mut bytes);
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn challenge(&self, s: &LoginSession) -> Message {
        Message::Challenge {
            session_id: s.session_id.clone(),
            record_ms: self.cfg.record_ms,
            created_at: s.created_at,
            freshness_ms: self.cfg.freshness_ms,
            policy: self.cfg.policy,
        }
    }

    /// Checks the password and, on success, opens a session and pushes a
    /// challenge to the enrolled phone. Returns the `LOGIN_CHALLENGE` reply.
    pub fn login_init(
        &self,
        username: &str,
        password: &str,
        client: &ClientMeta,
    ) -> Result<Message> {
        let now = self.now_ms();
        if let Err(e) = self.table.lock().unwrap().note_login(username, now) {
            self.record(username, None, e.code(), None, None, client);
            return Err(e);
        }
        let account = self.store.account(username);
        let ok = match &account {
            Some(a) => self.digester.verify(password, &a.password_digest),
            None => {
                let dummy = self
                    .dummy_digest
                    .get_or_init(|| self.digester.digest("", &mut StdRng::from_entropy()));
                self.digester.verify(password, dummy);
                false
            }
        };
        let Some(account) = account.filter(|_| ok) else {
            self.record(username, None, "BAD_CREDENTIALS", None, None, client);
            return Err(ProtocolError::BadCredentials);
        };

        let session_id = self.new_session_id();
        let mut table = self.table.lock().unwrap();
        let challenge = self.challenge(table.open(&session_id, username, now));
        if self.push.push(username, challenge) {
            table.challenge_sent(&session_id, now)?;
            self.record(
                username,
                Some(&session_id),
                "CHALLENGED",
                None,
                None,
                client,
            );
        } else {
            table.fall_back(&session_id, now, "DEVICE_UNREACHABLE")?;
            self.record(
                username,
                Some(&session_id),
                "FALLBACK_CODE",
                Some("DEVICE_UNREACHABLE"),
                None,
                client,
            );
        }
        drop(table);
        self.changed();
        Ok(Message::LoginChallenge {
            session_id,
            phone_pubkey: account.phone_pubkey,
            record_ms: self.cfg.record_ms,
        })
    }

    /// Forwards the computer's encrypted recording to the phone unchanged.
    pub fn submit_computer_sample(&self, session_id: &str, sample: EncryptedSample) -> Result<()> {
        let now = self.now_ms();
        let mut table = self.table.lock().unwrap();
        let username = table.get(session_id, now)?.username.clone();
        table.sample_submitted(session_id, now)?;
        let forwarded = Message::Sample {
            session_id: session_id.to_string(),
            sample,
        };
        if !self.push.push(&username, forwarded) {
            table.fall_back(session_id, now, "DEVICE_UNREACHABLE")?;
            self.record(
                &username,
                Some(session_id),
                "FALLBACK_CODE",
                Some("DEVICE_UNREACHABLE"),
                None,
                &ClientMeta::default(),
            );
        }
        drop(table);
        self.changed();
        Ok(())
    }

    /// Applies a phone verdict after checking its signature under the
    /// enrolled key. `device_user` is the username the delivering device
    /// channel authenticated as, if any.
    pub fn receive_verdict(
        &self,
        device_user: Option<&str>,
        session_id: &str,
        accepted: bool,
        reason: &str,
        score: Option<f64>,
        signature: &str,
    ) -> Result<SessionState> {
        let now = self.now_ms();
        let mut table = self.table.lock().unwrap();
        let username = table.get(session_id, now)?.username.clone();
        if device_user.is_some_and(|u| u != username) {
            return Err(ProtocolError::BadSession);
        }
        let account = self
            .store
            .account(&username)
            .ok_or(ProtocolError::BadSession)?;
        DevicePublicKey::from_base64(&account.phone_pubkey)?
            .verify_verdict(session_id, accepted, reason, score, signature)?;
        let state = table.verdict(session_id, now, accepted, reason)?;
        let outcome = if accepted { "ACCEPTED" } else { "REJECTED" };
        self.record(
            &username,
            Some(session_id),
            outcome,
            Some(reason),
            score,
            &ClientMeta::default(),
        );
        match state {
            SessionState::AwaitingSamples => {
                let challenge = self.challenge(table.get(session_id, now)?);
                if !self.push.push(&username, challenge) {
                    table.fall_back(session_id, now, "DEVICE_UNREACHABLE")?;
                }
            }
            SessionState::FallbackCode => {
                self.record(
                    &username,
                    Some(session_id),
                    "FALLBACK_CODE",
                    Some(reason),
                    None,
                    &ClientMeta::default(),
                );
            }
            _ => {}
        }
        let state = table.get(session_id, now)?.state;
        drop(table);
        self.changed();
        Ok(state)
    }

    pub fn verify_fallback_code(&self, session_id: &str, code: &str) -> Result<SessionState> {
        let now = self.now_ms();
        let mut table = self.table.lock().unwrap();
        let session = table.get(session_id, now)?;
        if session.state != SessionState::FallbackCode {
            return Err(ProtocolError::WrongState(session.state.as_str()));
        }
        let username = session.username.clone();
        let account = self
            .store
            .account(&username)
            .ok_or(ProtocolError::BadSession)?;
        let secret = b64_decode(&account.fallback_secret)?;
        let valid = totp::verify(&secret, code, now);
        let result = table.code_entered(session_id, now, valid);
        let outcome = if valid { "CODE_ACCEPTED" } else { "BAD_CODE" };
        self.record(
            &username,
            Some(session_id),
            outcome,
            None,
            None,
            &ClientMeta::default(),
        );
        drop(table);
        self.changed();
        result
    }

    /// A phone reported it is already busy with another challenge.
    pub fn device_busy(&self, device_user: &str, session_id: &str) {
        self.record(
            device_user,
            Some(session_id),
            "BUSY",
            None,
            None,
            &ClientMeta::default(),
        );
    }

    /// Current state and the reason for the most recent transition.
    pub fn result(&self, session_id: &str) -> Result<(SessionState, Option<String>)> {
        let now = self.now_ms();
        let mut table = self.table.lock().unwrap();
        let s = table.get(session_id, now)?;
        Ok((s.state, s.last_reason.clone()))
    }

    /// Waits up to `wait_ms` for the session to leave `from`.
    pub async fn wait_result(
        &self,
        session_id: &str,
        from: Option<SessionState>,
        wait_ms: u64,
    ) -> Result<(SessionState, Option<String>)> {
        let mut rx = self.subscribe();
        let deadline = tokio::time::Instant::now() + std::time::Duration::from_millis(wait_ms);
        loop {
            let current = self.result(session_id)?;
            if from.is_none_or(|f| f != current.0) {
                return Ok(current);
            }
            if tokio::time::timeout_at(deadline, rx.changed())
                .await
                .is_err()
            {
                return Ok(current);
            }
        }
    }

    /// Server half of a synchronization round.
    pub fn sync(&self, t1: i64) -> Message {
        let t2 = self.now_ms();
        let t3 = self.now_ms();
        Message::SyncResp { t1, t2, t3 }
    }

    /// Checks a device channel greeting: signed by the enrolled key and
    /// timestamped within the freshness window.
    pub fn authenticate_device(
        &self,
        username: &str,
        timestamp: i64,
        signature: &str,
    ) -> Result<()> {
        let account = self
            .store
            .account(username)
            .ok_or(ProtocolError::BadSignature)?;
        if (self.now_ms() - timestamp).abs() > self.cfg.freshness_ms {
            return Err(ProtocolError::BadSignature);
        }
        DevicePublicKey::from_base64(&account.phone_pubkey)?
            .verify_hello(username, timestamp, signature)
    }

    /// Drops expired sessions and stale throttle windows.
    pub fn sweep(&self) {
        self.table.lock().unwrap().sweep(self.now_ms());
    }

    /// Snapshot of live sessions; for inspection and model checking.
    pub fn sessions(&self) -> Vec<LoginSession> {
        let now = self.now_ms();
        let mut table = self.table.lock().unwrap();
        table.sweep(now);
        let mut v: Vec<_> = table.sessions().cloned().collect();
        v.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::DeviceKeys;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        svc: AuthService,
        push: Arc<MemoryPush>,
        clock: Arc<ManualClock>,
        keys: DeviceKeys,
    }

    fn fixture() -> Fixture {
        let push = Arc::new(MemoryPush::default());
        let clock = Arc::new(ManualClock::new(1_700_000_000_000));
        let svc = AuthService::new(
            ServiceConfig::default(),
            Arc::new(Store::in_memory()),
            clock.clone(),
            push.clone(),
        )
        .with_digester(PasswordDigester::light())
        .with_seed(1);
        let keys = DeviceKeys::generate(&mut ChaCha20Rng::seed_from_u64(2));
        svc.enroll("alice", "pw", &keys.public().to_base64())
            .unwrap();
        Fixture {
            svc,
            push,
            clock,
            keys,
        }
    }

    fn login(f: &Fixture) -> String {
        match f
            .svc
            .login_init("alice", "pw", &ClientMeta::default())
            .unwrap()
        {
            Message::LoginChallenge { session_id, .. } => session_id,
            m => panic!("{m:?}"),
        }
    }

    fn sample() -> EncryptedSample {
        EncryptedSample {
            wrapped_key: vec![7; 80],
            nonce: vec![1; 12],
            ciphertext: vec![9; 100],
        }
    }

    fn verdict(f: &Fixture, sid: &str, accepted: bool) -> Result<SessionState> {
        let reason = if accepted { "OK" } else { "LOW_SIMILARITY" };
        let sig = f.keys.sign_verdict(sid, accepted, reason, Some(0.3));
        f.svc
            .receive_verdict(Some("alice"), sid, accepted, reason, Some(0.3), &sig)
    }

    #[test]
    fn enroll_and_fetch_pubkey() {
        let f = fixture();
        assert_eq!(f.svc.pubkey("alice").unwrap(), f.keys.public().to_base64());
        assert_eq!(
            f.svc
                .enroll("alice", "x", &f.keys.public().to_base64())
                .unwrap_err(),
            ProtocolError::UsernameTaken
        );
        assert!(matches!(
            f.svc.enroll("bob", "x", "AAAA"),
            Err(ProtocolError::InvalidKey(_))
        ));
    }

    #[test]
    fn login_pushes_challenge() {
        let f = fixture();
        let sid = login(&f);
        let pushed = f.push.take();
        assert_eq!(pushed.len(), 1);
        assert!(
            matches!(&pushed[0].1, Message::Challenge { session_id, record_ms: 3000, .. } if *session_id == sid)
        );
        assert_eq!(f.svc.result(&sid).unwrap().0, SessionState::AwaitingSamples);
    }

    #[test]
    fn wrong_password_pushes_nothing() {
        let f = fixture();
        assert_eq!(
            f.svc
                .login_init("alice", "nope", &ClientMeta::default())
                .unwrap_err(),
            ProtocolError::BadCredentials
        );
        assert_eq!(
            f.svc
                .login_init("mallory", "pw", &ClientMeta::default())
                .unwrap_err(),
            ProtocolError::BadCredentials
        );
        assert!(f.push.take().is_empty());
        assert!(f.svc.sessions().is_empty());
    }

    #[test]
    fn sixth_login_in_a_minute_is_throttled() {
        let f = fixture();
        for _ in 0..5 {
            login(&f);
            f.clock.advance(1000);
        }
        assert_eq!(
            f.svc
                .login_init("alice", "pw", &ClientMeta::default())
                .unwrap_err(),
            ProtocolError::Throttled
        );
        f.clock.advance(60_000);
        login(&f);
    }

    #[test]
    fn sample_is_forwarded_verbatim() {
        let f = fixture();
        let sid = login(&f);
        f.push.take();
        f.svc.submit_computer_sample(&sid, sample()).unwrap();
        let pushed = f.push.take();
        assert_eq!(
            pushed,
            vec![(
                "alice".to_string(),
                Message::Sample {
                    session_id: sid.clone(),
                    sample: sample()
                }
            )]
        );
        assert_eq!(
            f.svc.submit_computer_sample(&sid, sample()).unwrap_err(),
            ProtocolError::WrongState("AWAITING_VERDICT")
        );
        assert_eq!(
            f.svc
                .submit_computer_sample("unknown", sample())
                .unwrap_err(),
            ProtocolError::BadSession
        );
    }

    #[test]
    fn signed_accept() {
        let f = fixture();
        let sid = login(&f);
        f.svc.submit_computer_sample(&sid, sample()).unwrap();
        assert_eq!(verdict(&f, &sid, true).unwrap(), SessionState::Accepted);
        let attempts = f.svc.store().attempts();
        let last = attempts.last().unwrap();
        assert_eq!(last.outcome, "ACCEPTED");
        assert_eq!(last.score, Some(0.3));
    }

    #[test]
    fn reject_retries_then_falls_back() {
        let f = fixture();
        let sid = login(&f);
        for expected in [
            SessionState::AwaitingSamples,
            SessionState::AwaitingSamples,
            SessionState::FallbackCode,
        ] {
            f.push.take();
            f.svc.submit_computer_sample(&sid, sample()).unwrap();
            assert_eq!(verdict(&f, &sid, false).unwrap(), expected);
        }
        let secret = b64_decode(&f.svc.store().account("alice").unwrap().fallback_secret).unwrap();
        let stale = totp::code_at(&secret, f.svc.now_ms() - 2 * totp::STEP_MS);
        if !totp::verify(&secret, &stale, f.svc.now_ms()) {
            assert_eq!(
                f.svc.verify_fallback_code(&sid, &stale).unwrap_err(),
                ProtocolError::BadCode
            );
        }
        let code = totp::code_at(&secret, f.svc.now_ms());
        assert_eq!(
            f.svc.verify_fallback_code(&sid, &code).unwrap(),
            SessionState::Accepted
        );
    }

    #[test]
    fn tampered_signature_leaves_session_unchanged() {
        let f = fixture();
        let sid = login(&f);
        f.svc.submit_computer_sample(&sid, sample()).unwrap();
        let sig = f.keys.sign_verdict(&sid, false, "LOW_SIMILARITY", None);
        assert_eq!(
            f.svc
                .receive_verdict(None, &sid, true, "OK", None, &sig)
                .unwrap_err(),
            ProtocolError::BadSignature
        );
        let other = DeviceKeys::generate(&mut ChaCha20Rng::seed_from_u64(3));
        let forged = other.sign_verdict(&sid, true, "OK", None);
        assert_eq!(
            f.svc
                .receive_verdict(None, &sid, true, "OK", None, &forged)
                .unwrap_err(),
            ProtocolError::BadSignature
        );
        assert_eq!(f.svc.result(&sid).unwrap().0, SessionState::AwaitingVerdict);
    }

    #[test]
    fn unreachable_device_falls_back() {
        let f = fixture();
        f.push.set_offline("alice");
        let sid = login(&f);
        assert_eq!(
            f.svc.result(&sid).unwrap(),
            (
                SessionState::FallbackCode,
                Some("DEVICE_UNREACHABLE".into())
            )
        );
    }

    #[test]
    fn device_hello() {
        let f = fixture();
        let now = f.svc.now_ms();
        let sig = f.keys.sign_hello("alice", now);
        assert!(f.svc.authenticate_device("alice", now, &sig).is_ok());
        assert!(f.svc.authenticate_device("bob", now, &sig).is_err());
        let old = f.keys.sign_hello("alice", now - 31_000);
        assert!(f
            .svc
            .authenticate_device("alice", now - 31_000, &old)
            .is_err());
    }

    #[test]
    fn sessions_expire() {
        let f = fixture();
        let sid = login(&f);
        f.clock.advance(60_001);
        assert_eq!(f.svc.result(&sid).unwrap_err(), ProtocolError::BadSession);
    }
}
