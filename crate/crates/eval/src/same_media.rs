//! Same-media attack: victim and attacker hear the same broadcast from
//! different places, offset by the difference in provider delay.

use earshot_core::{AudioSample, ScoringPolicy, CANONICAL_FS};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rates::{Metric, RateReport};
use crate::score::{PairScore, Scorer};
use crate::synth::{noise, pair_rng, SOURCE_RMS};
use crate::{EvalError, Result};

/// Provider delay between the victim's and the attacker's copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayDistribution {
    Fixed { ms: f64 },
    Uniform { lo_ms: f64, hi_ms: f64 },
}

impl DelayDistribution {
    pub fn max_ms(&self) -> f64 {
        match *self {
            DelayDistribution::Fixed { ms } => ms,
            DelayDistribution::Uniform { hi_ms, .. } => hi_ms,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            DelayDistribution::Fixed { ms } => ms,
            DelayDistribution::Uniform { lo_ms, hi_ms } => rng.gen_range(lo_ms..=hi_ms),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DelayDistribution::Fixed { ms } => format!("delay {ms} ms"),
            DelayDistribution::Uniform { lo_ms, hi_ms } => format!("delay U[{lo_ms}, {hi_ms}] ms"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SameMediaConfig {
    pub delay: DelayDistribution,
    pub trials: usize,
    pub seed: u64,
    pub record_ms: u32,
    /// Device noise relative to the broadcast; `None` for clean copies.
    pub snr_db: Option<f64>,
}

impl SameMediaConfig {
    pub fn new(delay: DelayDistribution, trials: usize, seed: u64) -> Self {
        Self {
            delay,
            trials,
            seed,
            record_ms: 3000,
            snr_db: None,
        }
    }
}

/// A seeded non-repeating broadcast of `duration_ms`.
pub fn synthetic_broadcast(seed: u64, duration_ms: u32) -> AudioSample {
    let n = (duration_ms as u64 * CANONICAL_FS as u64 / 1000) as usize;
    let pcm = noise(&mut pair_rng(seed, usize::MAX), n, SOURCE_RMS);
    AudioSample::from_clamped(pcm, CANONICAL_FS, 0, "broadcast").expect("positive rate")
}

/// Scores `trials` attacks on windows of `source` and reports the FAR.
pub fn simulate_same_media(
    source: &AudioSample,
    cfg: &SameMediaConfig,
    policy: &ScoringPolicy,
) -> Result<RateReport> {
    if cfg.trials == 0 {
        return Err(EvalError::Empty("no trials".into()));
    }
    let fs = source.fs();
    let to_samples = |ms: f64| (ms.max(0.0) * fs as f64 / 1000.0).round() as usize;
    let n = to_samples(cfg.record_ms as f64);
    let max_delay = to_samples(cfg.delay.max_ms());
    if source.len() < n + max_delay {
        return Err(EvalError::Empty(format!(
            "source of {} ms is shorter than recording plus delay",
            source.duration_ms()
        )));
    }
    let trials: Vec<usize> = (0..cfg.trials).collect();
    let scorer = Scorer::for_policy(policy);
    let scores: Vec<PairScore> = scorer.score_all(&trials, |&i| {
        let mut rng = pair_rng(cfg.seed, i);
        let delay = to_samples(cfg.delay.draw(&mut rng));
        let start = rng.gen_range(0..=source.len() - n - delay);
        let mut victim = source.pcm()[start..start + n].to_vec();
        let mut attacker = source.pcm()[start + delay..start + delay + n].to_vec();
        if let Some(snr) = cfg.snr_db {
            let rms = SOURCE_RMS * 10f64.powf(-snr / 20.0);
            for v in [&mut victim, &mut attacker] {
                for (x, e) in v.iter_mut().zip(noise(&mut rng, n, rms)) {
                    *x += e;
                }
            }
        }
        Ok((
            AudioSample::from_clamped(victim, fs, 0, "victim")?,
            AudioSample::from_clamped(attacker, fs, 0, "attacker")?,
        ))
    })?;
    let label = cfg.delay.label();
    Ok(RateReport::tally(
        format!("same-media {label}"),
        Metric::Far,
        scores.iter().map(|s| (label.as_str(), s)),
        &policy.band_set,
        policy.tau_c,
    ))
}
