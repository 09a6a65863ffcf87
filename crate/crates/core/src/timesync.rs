//! Clock-offset estimation against the server and alignment of two recordings
//! on the server clock.
//!
//! Each synchronization round is a four-timestamp exchange: the client sends
//! at `t1` (client clock), the server receives at `t2` and replies at `t3`
//! (server clock), and the client receives at `t4`. The round with the smallest
//! round-trip time gives the offset estimate.

use serde::{Deserialize, Serialize};

use crate::audio::{ms_to_samples, AudioSample};
use crate::{Error, Result};

/// Shortest common window two recordings must share to be compared.
pub const MIN_OVERLAP_MS: i64 = 2500;

/// Rounds collected per recording window.
pub const DEFAULT_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncRound {
    pub t1: i64,
    pub t2: i64,
    pub t3: i64,
    pub t4: i64,
}

impl SyncRound {
    pub fn new(t1: i64, t2: i64, t3: i64, t4: i64) -> Result<Self> {
        if t4 < t1 {
            return Err(Error::InvalidRound(format!("t4 {t4} precedes t1 {t1}")));
        }
        if t3 < t2 {
            return Err(Error::InvalidRound(format!("t3 {t3} precedes t2 {t2}")));
        }
        Ok(Self { t1, t2, t3, t4 })
    }

    /// Network round trip, excluding the server's processing time. Floors at 0.
    pub fn rtt(&self) -> i64 {
        ((self.t4 - self.t1) - (self.t3 - self.t2)).max(0)
    }

    /// `((t2 − t1) + (t3 − t4)) / 2`, rounded half away from zero.
    pub fn offset(&self) -> i64 {
        let twice = (self.t2 - self.t1) + (self.t3 - self.t4);
        div_round(twice, 2)
    }
}

fn div_round(num: i64, den: i64) -> i64 {
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}

/// Server clock minus client clock, as estimated from a set of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockOffset {
    pub offset_ms: i64,
    pub rtt_ms: i64,
    pub rounds_used: usize,
}

impl ClockOffset {
    pub const ZERO: ClockOffset = ClockOffset {
        offset_ms: 0,
        rtt_ms: 0,
        rounds_used: 0,
    };
}

/// Offset of the minimum-RTT round (the earliest one on ties).
pub fn estimate_offset(rounds: &[SyncRound]) -> Result<ClockOffset> {
    let best = rounds
        .iter()
        .enumerate()
        .min_by_key(|(i, r)| (r.rtt(), *i))
        .map(|(_, r)| r)
        .ok_or(Error::NoRounds)?;
    Ok(ClockOffset {
        offset_ms: best.offset(),
        rtt_ms: best.rtt(),
        rounds_used: rounds.len(),
    })
}

/// Converts a client-clock timestamp to the server clock.
pub fn adjust_timestamp(local_ms: i64, off: &ClockOffset) -> i64 {
    local_ms + off.offset_ms
}

/// Trims two server-timestamped recordings to their common window.
///
/// Both must share a sampling rate. The later-starting recording keeps its
/// head and the earlier one loses the lead-in; tails are cut to the shorter
/// remainder so the outputs have equal length and equal capture time.
pub fn align(a: &AudioSample, b: &AudioSample) -> Result<(AudioSample, AudioSample)> {
    if a.fs() != b.fs() {
        return Err(Error::FsMismatch(a.fs(), b.fs()));
    }
    let start = a.captured_at().max(b.captured_at());
    let end = (a.captured_at() + a.duration_ms()).min(b.captured_at() + b.duration_ms());
    let overlap_ms = end - start;
    if overlap_ms < MIN_OVERLAP_MS {
        return Err(Error::DurationMismatch {
            overlap_ms,
            required_ms: MIN_OVERLAP_MS,
        });
    }
    let fs = a.fs();
    let head_a = ms_to_samples((start - a.captured_at()) as f64, fs);
    let head_b = ms_to_samples((start - b.captured_at()) as f64, fs);
    let len = (a.len() - head_a.min(a.len())).min(b.len() - head_b.min(b.len()));
    let a2 = a.slice(head_a, head_a + len).with_captured_at(start);
    let b2 = b.slice(head_b, head_b + len).with_captured_at(start);
    Ok((a2, b2))
}
