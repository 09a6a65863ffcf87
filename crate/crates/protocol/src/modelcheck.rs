//! Exhaustive small-model check of login safety.
//!
//! Drives a real [`AuthService`] (in-memory store, manual clock, recorded
//! pushes) through every sequence of abstract messages up to a given length
//! and checks that no session reaches `ACCEPTED` unless it was opened with
//! the right password and then received either a genuinely signed accept or a
//! valid fallback code.
//!
//! The service cannot be cloned, so each sequence is replayed from a fresh
//! service. Sequences that lead to an already-seen state are not extended,
//! which keeps the search small while still covering every reachable state.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::{DeviceKeys, PasswordDigester};
use crate::service::{AuthService, Clock, ManualClock, MemoryPush, ServiceConfig};
use crate::session::SessionState;
use crate::store::{ClientMeta, Store};
use crate::totp;
use crate::wire::{b64_decode, EncryptedSample, Message};

const USER: &str = "alice";
const PASSWORD: &str = "correct";
const START_MS: i64 = 1_700_000_000_000;
/// Clock step of the `Tick` action; two ticks expire a session.
pub const TICK_MS: i64 = 31_000;
/// Sessions addressable by the message alphabet.
const SLOTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    LoginGood,
    LoginBad,
    Submit(usize),
    /// Verdict signed by the enrolled device key.
    SignedAccept(usize),
    SignedReject(usize),
    /// Accept signed by a key that is not enrolled.
    ForgedAccept(usize),
    /// Genuine accept signature for the other slot's session, replayed here.
    CrossAccept(usize),
    CodeValid(usize),
    CodeInvalid(usize),
    Tick,
}

pub fn alphabet() -> Vec<Action> {
    let mut v = vec![Action::LoginGood, Action::LoginBad, Action::Tick];
    for k in 0..SLOTS {
        v.extend([
            Action::Submit(k),
            Action::SignedAccept(k),
            Action::SignedReject(k),
            Action::ForgedAccept(k),
            Action::CrossAccept(k),
            Action::CodeValid(k),
            Action::CodeInvalid(k),
        ]);
    }
    v
}

/// What the environment did for a session, independent of the server's view.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Evidence {
    password_ok: bool,
    signed_accept: bool,
    valid_code: bool,
}

struct World {
    svc: AuthService,
    clock: Arc<ManualClock>,
    keys: DeviceKeys,
    rogue: DeviceKeys,
    secret: Vec<u8>,
    sessions: Vec<(String, Evidence)>,
    logins: Vec<i64>,
}

impl World {
    fn new() -> Self {
        let clock = Arc::new(ManualClock::new(START_MS));
        let svc = AuthService::new(
            ServiceConfig::default(),
            Arc::new(Store::in_memory()),
            clock.clone(),
            Arc::new(MemoryPush::default()),
        )
        .with_digester(PasswordDigester::light())
        .with_seed(7);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let keys = DeviceKeys::generate(&mut rng);
        let rogue = DeviceKeys::generate(&mut rng);
        let account = svc
            .enroll(USER, PASSWORD, &keys.public().to_base64())
            .expect("fresh store");
        let secret = b64_decode(&account.fallback_secret).expect("own encoding");
        Self {
            svc,
            clock,
            keys,
            rogue,
            secret,
            sessions: Vec::new(),
            logins: Vec::new(),
        }
    }

    fn sid(&self, k: usize) -> Option<String> {
        self.sessions.get(k).map(|(s, _)| s.clone())
    }

    fn evidence(&mut self, k: usize) -> &mut Evidence {
        &mut self.sessions[k].1
    }

    fn verdict(&self, sid: &str, signer: &DeviceKeys, signed_for: &str, accepted: bool) {
        let reason = if accepted { "OK" } else { "LOW_SIMILARITY" };
        let sig = signer.sign_verdict(signed_for, accepted, reason, Some(0.5));
        let _ = self
            .svc
            .receive_verdict(Some(USER), sid, accepted, reason, Some(0.5), &sig);
    }

    fn apply(&mut self, a: Action) {
        let now = self.clock.now_ms();
        match a {
            Action::LoginGood | Action::LoginBad => {
                self.logins.push(now);
                let good = a == Action::LoginGood;
                let pw = if good { PASSWORD } else { "wrong" };
                if let Ok(Message::LoginChallenge { session_id, .. }) =
                    self.svc.login_init(USER, pw, &ClientMeta::default())
                {
                    self.sessions.push((
                        session_id,
                        Evidence {
                            password_ok: good,
                            ..Default::default()
                        },
                    ));
                }
            }
            Action::Tick => self.clock.advance(TICK_MS),
            Action::Submit(k) => {
                if let Some(sid) = self.sid(k) {
                    let sample = EncryptedSample {
                        wrapped_key: vec![0; 80],
                        nonce: vec![0; 12],
                        ciphertext: vec![0; 16],
                    };
                    let _ = self.svc.submit_computer_sample(&sid, sample);
                }
            }
            Action::SignedAccept(k) => {
                if let Some(sid) = self.sid(k) {
                    self.evidence(k).signed_accept = true;
                    self.verdict(&sid, &self.keys, &sid, true);
                }
            }
            Action::SignedReject(k) => {
                if let Some(sid) = self.sid(k) {
                    self.verdict(&sid, &self.keys, &sid, false);
                }
            }
            Action::ForgedAccept(k) => {
                if let Some(sid) = self.sid(k) {
                    self.verdict(&sid, &self.rogue, &sid, true);
                }
            }
            Action::CrossAccept(k) => {
                if let (Some(sid), Some(other)) = (self.sid(k), self.sid(1 - k)) {
                    self.evidence(1 - k).signed_accept = true;
                    self.verdict(&sid, &self.keys, &other, true);
                }
            }
            Action::CodeValid(k) => {
                if let Some(sid) = self.sid(k) {
                    self.evidence(k).valid_code = true;
                    let code = totp::code_at(&self.secret, now);
                    let _ = self.svc.verify_fallback_code(&sid, &code);
                }
            }
            Action::CodeInvalid(k) => {
                if let Some(sid) = self.sid(k) {
                    let valid = totp::code_at(&self.secret, now);
                    let wrong = format!(
                        "{:06}",
                        (valid.parse::<u32>().unwrap_or(0) + 500_000) % 1_000_000
                    );
                    // A guess that happens to hit a neighbouring step is a valid code.
                    if self.svc.verify_fallback_code(&sid, &wrong).is_ok() {
                        self.evidence(k).valid_code = true;
                    }
                }
            }
        }
    }

    /// Full observable state, used to prune already-explored branches.
    fn fingerprint(&self) -> Fingerprint {
        let now = self.clock.now_ms();
        let live: Vec<_> = self
            .svc
            .sessions()
            .into_iter()
            .map(|s| {
                let slot = self
                    .sessions
                    .iter()
                    .position(|(id, _)| *id == s.session_id)
                    .unwrap_or(usize::MAX);
                (
                    slot,
                    s.state,
                    s.attempt_count,
                    s.code_failures,
                    s.created_at - now,
                    s.expires_at - now,
                )
            })
            .collect();
        Fingerprint {
            elapsed: now - START_MS,
            created: self.sessions.len(),
            live: live.into_iter().collect(),
            evidence: self.sessions.iter().map(|(_, e)| *e).collect(),
            logins: self.logins.iter().map(|t| t - now).collect(),
            totp_step: now.div_euclid(totp::STEP_MS),
        }
    }

    fn violations(&self) -> Vec<String> {
        let accepted: HashSet<String> = self
            .svc
            .sessions()
            .into_iter()
            .filter(|s| s.state == SessionState::Accepted)
            .map(|s| s.session_id)
            .collect();
        self.sessions
            .iter()
            .filter(|(id, e)| {
                accepted.contains(id) && !(e.password_ok && (e.signed_accept || e.valid_code))
            })
            .map(|(id, e)| format!("{id}: {e:?}"))
            .collect()
    }

    fn accepted_count(&self) -> usize {
        self.svc
            .sessions()
            .iter()
            .filter(|s| s.state == SessionState::Accepted)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Fingerprint {
    elapsed: i64,
    created: usize,
    live: BTreeSet<(usize, SessionState, u32, u32, i64, i64)>,
    evidence: Vec<Evidence>,
    logins: Vec<i64>,
    totp_step: i64,
}

#[derive(Debug, Clone, Default)]
pub struct ModelReport {
    pub depth: usize,
    /// Distinct states reached.
    pub states: usize,
    /// Sequences replayed, including pruned ones.
    pub sequences: usize,
    /// States in which at least one session is `ACCEPTED`.
    pub accepting_states: usize,
    pub violations: Vec<(Vec<Action>, String)>,
}

/// Breadth-first search over all message sequences of length `≤ depth`.
pub fn check(depth: usize) -> ModelReport {
    let actions = alphabet();
    let mut seen = HashSet::new();
    let mut report = ModelReport {
        depth,
        ..Default::default()
    };
    let mut queue: VecDeque<Vec<Action>> = VecDeque::from([Vec::new()]);
    seen.insert(World::new().fingerprint());
    report.states = 1;

    while let Some(path) = queue.pop_front() {
        if path.len() == depth {
            continue;
        }
        for &a in &actions {
            let mut next = path.clone();
            next.push(a);
            let mut w = World::new();
            for &step in &next {
                w.apply(step);
            }
            report.sequences += 1;
            for v in w.violations() {
                report.violations.push((next.clone(), v));
            }
            if seen.insert(w.fingerprint()) {
                report.states += 1;
                if w.accepted_count() > 0 {
                    report.accepting_states += 1;
                }
                queue.push_back(next);
            }
        }
    }
    report
}
