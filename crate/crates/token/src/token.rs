//! Challenge handling: record, synchronize, decrypt, score, sign.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use earshot_core::{
    adjust_timestamp, align, default_policy, estimate_offset, evaluate, resample, AudioSample,
    ClockOffset, ScoringPolicy, SyncRound,
};
use earshot_protocol::{decode_payload, DeviceKeys, EncryptedSample, Message};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::clock::LocalClock;
use crate::conn::{Connection, Pushes, Transcript};
use crate::source::AudioSource;
use crate::{Result, TokenError};

#[derive(Debug, Clone)]
pub struct TokenOptions {
    pub sync_rounds: usize,
    /// How long to wait for the computer's recording after a challenge.
    pub sample_timeout_ms: u64,
    /// Take `record_ms` of wall time per recording, like a microphone would.
    pub realtime: bool,
    pub clock_skew_ms: i64,
    /// Takes precedence over any policy carried by the challenge.
    pub policy_override: Option<ScoringPolicy>,
}

impl Default for TokenOptions {
    fn default() -> Self {
        Self {
            sync_rounds: 8,
            sample_timeout_ms: 60_000,
            realtime: false,
            clock_skew_ms: 0,
            policy_override: None,
        }
    }
}

/// Outcome of local verification, before signing.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgement {
    pub accepted: bool,
    pub reason: String,
    pub score: Option<f64>,
}

impl Judgement {
    fn reject(reason: &str) -> Self {
        Self {
            accepted: false,
            reason: reason.into(),
            score: None,
        }
    }
}

/// Verifies the computer's encrypted recording against the phone's.
/// Both carry server-clock capture times.
pub fn judge(
    keys: &DeviceKeys,
    phone: &AudioSample,
    sample: &EncryptedSample,
    freshness_ms: i64,
    policy: &ScoringPolicy,
) -> Judgement {
    let Ok(plain) = keys.open(sample) else {
        return Judgement::reject("DECRYPT_FAIL");
    };
    let Ok(computer) = decode_payload(&plain, "computer") else {
        return Judgement::reject("MALFORMED_SAMPLE");
    };
    if (computer.captured_at() - phone.captured_at()).abs() > freshness_ms {
        return Judgement::reject("STALE_SAMPLE");
    }
    let computer = resample(&computer, phone.fs());
    let Ok((p, c)) = align(phone, &computer) else {
        return Judgement::reject("DURATION_MISMATCH");
    };
    match evaluate(&p, &c, policy) {
        Ok(v) => Judgement {
            accepted: v.accepted,
            reason: v.reason.as_str().into(),
            score: v.score,
        },
        Err(e) => {
            tracing::warn!(error = %e, "scoring failed");
            Judgement::reject("SCORING_ERROR")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenEvent {
    /// A verdict was sent; `reply` is the server's answer to it.
    Verdict {
        session_id: String,
        judgement: Judgement,
        reply: Message,
    },
    /// A challenge arrived while another was in progress.
    Busy { session_id: String },
}

/// The enrolled phone: identity, microphone and behavior.
pub struct Token {
    pub username: String,
    pub keys: DeviceKeys,
    pub source: AudioSource,
    pub opts: TokenOptions,
}

type Active = Arc<Mutex<Option<(String, Option<oneshot::Sender<EncryptedSample>>)>>>;

/// A connected token serving challenges on a background task.
pub struct TokenHandle {
    events: mpsc::UnboundedReceiver<TokenEvent>,
    transcript: Transcript,
    task: JoinHandle<()>,
}

impl TokenHandle {
    pub async fn next_event(&mut self, timeout: Duration) -> Option<TokenEvent> {
        tokio::time::timeout(timeout, self.events.recv())
            .await
            .ok()
            .flatten()
    }

    pub fn transcript(&self) -> Vec<Message> {
        self.transcript.lock().unwrap().clone()
    }

    /// Runs until the server closes the channel.
    pub async fn join(self) {
        self.task.await.ok();
    }

    pub fn stop(self) {
        self.task.abort();
    }
}

impl Token {
    fn clock(&self) -> LocalClock {
        LocalClock::skewed(self.opts.clock_skew_ms)
    }

    /// Connects to the device channel and starts serving challenges.
    pub async fn start(self, device_addr: &str) -> Result<TokenHandle> {
        let (conn, pushes) =
            Connection::open(device_addr, &self.username, &self.keys, self.clock()).await?;
        let transcript = conn.transcript();
        let (tx, events) = mpsc::unbounded_channel();
        let task = tokio::spawn(Arc::new(self).serve(conn, pushes, tx));
        Ok(TokenHandle {
            events,
            transcript,
            task,
        })
    }

    async fn serve(
        self: Arc<Self>,
        conn: Connection,
        mut pushes: Pushes,
        events: mpsc::UnboundedSender<TokenEvent>,
    ) {
        let active: Active = Arc::default();
        while let Some(msg) = pushes.recv().await {
            match msg {
                Message::Challenge {
                    session_id,
                    record_ms,
                    freshness_ms,
                    policy,
                    ..
                } => {
                    let mut slot = active.lock().unwrap();
                    if slot.is_some() {
                        tracing::info!(session_id, "busy; declining challenge");
                        let conn = conn.clone();
                        let busy = Message::Busy {
                            session_id: session_id.clone(),
                        };
                        tokio::spawn(async move { conn.request(busy).await });
                        events.send(TokenEvent::Busy { session_id }).ok();
                        continue;
                    }
                    let (tx, rx) = oneshot::channel();
                    *slot = Some((session_id.clone(), Some(tx)));
                    let policy = self
                        .opts
                        .policy_override
                        .or(policy)
                        .unwrap_or_else(default_policy);
                    let job = Challenge {
                        session_id,
                        record_ms,
                        freshness_ms,
                        policy,
                    };
                    let (me, conn, active, events) =
                        (self.clone(), conn.clone(), active.clone(), events.clone());
                    tokio::spawn(async move {
                        let sid = job.session_id.clone();
                        if let Err(e) = me.handle(job, rx, &conn, &active, &events).await {
                            tracing::warn!(session_id = sid, error = %e, "challenge abandoned");
                            release(&active, &sid);
                        }
                    });
                }
                Message::Sample { session_id, sample } => {
                    let tx = match active.lock().unwrap().as_mut() {
                        Some((sid, tx)) if *sid == session_id => tx.take(),
                        _ => None,
                    };
                    match tx {
                        Some(tx) => {
                            tx.send(sample).ok();
                        }
                        None => tracing::warn!(session_id, "sample for no active challenge"),
                    }
                }
                other => tracing::warn!(?other, "unexpected push"),
            }
        }
    }

    async fn handle(
        self: Arc<Self>,
        job: Challenge,
        sample: oneshot::Receiver<EncryptedSample>,
        conn: &Connection,
        active: &Active,
        events: &mpsc::UnboundedSender<TokenEvent>,
    ) -> Result<()> {
        let local_start = self.clock().now_ms();
        let record = async {
            if self.opts.realtime {
                tokio::time::sleep(Duration::from_millis(job.record_ms as u64)).await;
            }
            self.source.record(job.record_ms, local_start)
        };
        let (phone, offset) = tokio::join!(record, self.sync(conn));
        let phone = phone?.with_captured_at(adjust_timestamp(local_start, &offset?));

        let waited =
            tokio::time::timeout(Duration::from_millis(self.opts.sample_timeout_ms), sample).await;
        let judgement = match waited {
            Ok(Ok(sample)) => {
                let me = self.clone();
                let Challenge {
                    freshness_ms,
                    policy,
                    ..
                } = job.clone();
                tokio::task::spawn_blocking(move || {
                    judge(&me.keys, &phone, &sample, freshness_ms, &policy)
                })
                .await
                .map_err(|e| TokenError::Config(e.to_string()))?
            }
            _ => Judgement::reject("TIMEOUT"),
        };
        tracing::info!(session_id = job.session_id, ?judgement, "verdict");

        release(active, &job.session_id);
        let signature = self.keys.sign_verdict(
            &job.session_id,
            judgement.accepted,
            &judgement.reason,
            judgement.score,
        );
        let reply = conn
            .request(Message::Verdict {
                session_id: job.session_id.clone(),
                accepted: judgement.accepted,
                reason: judgement.reason.clone(),
                score: judgement.score,
                signature,
            })
            .await?;
        events
            .send(TokenEvent::Verdict {
                session_id: job.session_id,
                judgement,
                reply,
            })
            .ok();
        Ok(())
    }

    async fn sync(&self, conn: &Connection) -> Result<ClockOffset> {
        let clock = self.clock();
        let mut rounds = Vec::with_capacity(self.opts.sync_rounds);
        for _ in 0..self.opts.sync_rounds {
            let t1 = clock.now_ms();
            let reply = conn.request(Message::SyncReq { t1 }).await?;
            let t4 = clock.now_ms();
            if let Message::SyncResp { t1: echo, t2, t3 } = reply {
                if echo == t1 {
                    if let Ok(r) = SyncRound::new(t1, t2, t3, t4) {
                        rounds.push(r);
                    }
                }
            }
        }
        Ok(estimate_offset(&rounds)?)
    }
}

#[derive(Debug, Clone)]
struct Challenge {
    session_id: String,
    record_ms: u32,
    freshness_ms: i64,
    policy: ScoringPolicy,
}

fn release(active: &Active, session_id: &str) {
    let mut slot = active.lock().unwrap();
    if slot.as_ref().is_some_and(|(sid, _)| sid == session_id) {
        *slot = None;
    }
}
