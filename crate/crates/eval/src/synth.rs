//! Seeded synthetic recordings standing in for a field-collected corpus.
//!
//! A co-located pair is one broadband source heard by both devices, offset by
//! an acoustic lag, with independent device noise at a chosen SNR. An
//! independent pair uses two unrelated sources.

use std::fs;
use std::path::Path;

use earshot_core::{encode_wav, AudioSample, CANONICAL_FS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{Manifest, ManifestEntry, Pairing};
use crate::{EvalError, Result};

/// RMS amplitude of generated sources: −20 dBFS, about 76 dB with the
/// default power reference.
pub const SOURCE_RMS: f64 = 0.1;
/// Capture time of the first generated pair; later pairs are a minute apart.
pub const EPOCH_MS: i64 = 1_700_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Colocated,
    Independent,
}

impl std::str::FromStr for PairKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "colocated" => Ok(PairKind::Colocated),
            "independent" => Ok(PairKind::Independent),
            other => Err(format!("unknown pair kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub pairs: usize,
    pub snr_db: f64,
    /// Acoustic lag between the devices; the upper bound when `random_lag`.
    pub lag_ms: f64,
    #[serde(default)]
    pub random_lag: bool,
    pub seed: u64,
    pub kind: PairKind,
    #[serde(default = "default_duration")]
    pub duration_ms: u32,
    /// Entries are spread round-robin over this many subjects.
    #[serde(default = "default_subjects")]
    pub subjects: usize,
}

fn default_duration() -> u32 {
    3000
}

fn default_subjects() -> usize {
    2
}

impl SynthSpec {
    pub fn new(pairs: usize, snr_db: f64, lag_ms: f64, seed: u64, kind: PairKind) -> Self {
        Self {
            pairs,
            snr_db,
            lag_ms,
            random_lag: false,
            seed,
            kind,
            duration_ms: default_duration(),
            subjects: default_subjects(),
        }
    }

    pub fn random_lag(mut self) -> Self {
        self.random_lag = true;
        self
    }
}

/// Deterministic generator for pair `index` of a seeded corpus.
pub fn pair_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Gaussian noise with the given RMS.
pub fn noise<R: Rng>(rng: &mut R, n: usize, rms: f64) -> Vec<f64> {
    let d = Normal::new(0.0, rms).expect("finite rms");
    (0..n).map(|_| d.sample(rng)).collect()
}

fn sample(pcm: Vec<f64>, fs: u32, captured_at: i64, device: &str) -> AudioSample {
    AudioSample::from_clamped(pcm, fs, captured_at, device).expect("positive rate")
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Two views of one source, `lag_samples` apart, each with its own noise.
/// Returns `(phone, computer)`, both stamped `captured_at`.
pub fn colocated_pair<R: Rng>(
    rng: &mut R,
    fs: u32,
    n: usize,
    snr_db: f64,
    lag_samples: usize,
    captured_at: i64,
) -> (AudioSample, AudioSample) {
    let source = noise(rng, n + lag_samples, SOURCE_RMS);
    let noise_rms = SOURCE_RMS * 10f64.powf(-snr_db / 20.0);
    let phone = add(&source[..n], &noise(rng, n, noise_rms));
    let computer = add(&source[lag_samples..], &noise(rng, n, noise_rms));
    (
        sample(phone, fs, captured_at, "phone"),
        sample(computer, fs, captured_at, "computer"),
    )
}

/// Two unrelated sources of the same level.
pub fn independent_pair<R: Rng>(
    rng: &mut R,
    fs: u32,
    n: usize,
    captured_at: i64,
) -> (AudioSample, AudioSample) {
    let phone = noise(rng, n, SOURCE_RMS);
    let computer = noise(rng, n, SOURCE_RMS);
    (
        sample(phone, fs, captured_at, "phone"),
        sample(computer, fs, captured_at, "computer"),
    )
}

/// Pair `index` of the corpus described by `spec`, in memory.
pub fn generate_pair(spec: &SynthSpec, index: usize) -> (AudioSample, AudioSample) {
    let mut rng = pair_rng(spec.seed, index);
    let fs = CANONICAL_FS;
    let n = (spec.duration_ms as u64 * fs as u64 / 1000) as usize;
    let at = EPOCH_MS + index as i64 * 60_000;
    match spec.kind {
        PairKind::Colocated => {
            let lag_ms = if spec.random_lag {
                rng.gen_range(0.0..=spec.lag_ms.max(0.0))
            } else {
                spec.lag_ms.max(0.0)
            };
            let lag = (lag_ms * fs as f64 / 1000.0).round() as usize;
            colocated_pair(&mut rng, fs, n, spec.snr_db, lag, at)
        }
        PairKind::Independent => independent_pair(&mut rng, fs, n, at),
    }
}

/// Writes the corpus as 16-bit WAV files plus `manifest.jsonl` into `out_dir`.
/// Output bytes depend only on `spec`.
pub fn synth_generate(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| EvalError::io(out_dir, e))?;
    let subjects = spec.subjects.max(1);
    let entries = (0..spec.pairs)
        .into_par_iter()
        .map(|i| {
            let (phone, computer) = generate_pair(spec, i);
            let phone_wav = format!("pair_{i:04}_phone.wav");
            let computer_wav = format!("pair_{i:04}_computer.wav");
            for (name, s) in [(&phone_wav, &phone), (&computer_wav, &computer)] {
                let path = out_dir.join(name);
                fs::write(&path, encode_wav(s)?).map_err(|e| EvalError::io(&path, e))?;
            }
            Ok(ManifestEntry {
                phone_wav: phone_wav.into(),
                computer_wav: computer_wav.into(),
                phone_captured_at: phone.captured_at(),
                computer_captured_at: computer.captured_at(),
                subject: format!("s{}", i % subjects),
                environment: "Synthetic".into(),
                activity: "None".into(),
                phone_position: "Table".into(),
                phone_model: "synthetic".into(),
                computer_model: "synthetic".into(),
                pairing: match spec.kind {
                    PairKind::Colocated => Pairing::Legitimate,
                    PairKind::Independent => Pairing::Impostor,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest::new(entries, out_dir);
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_has_requested_rms() {
        let v = noise(&mut pair_rng(1, 0), 200_000, 0.1);
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        assert!((rms - 0.1).abs() < 0.001, "{rms}");
    }

    #[test]
    fn colocated_pair_has_requested_snr_and_lag() {
        let mut rng = pair_rng(3, 0);
        let (p, c) = colocated_pair(&mut rng, 1000, 20_000, 10.0, 7, 0);
        // Phone sample i + 7 and computer sample i share the source.
        let shared: f64 = (0..p.len() - 7).map(|i| p.pcm()[i + 7] * c.pcm()[i]).sum();
        let energy: f64 = c.pcm().iter().map(|x| x * x).sum();
        // Source power over total power is 1 / (1 + 10^(-SNR/10)) = 0.909.
        assert!(
            (shared / energy - 0.909).abs() < 0.03,
            "{}",
            shared / energy
        );
    }

    #[test]
    fn pairs_are_deterministic_and_independent_of_order() {
        let spec = SynthSpec::new(5, 10.0, 50.0, 9, PairKind::Colocated);
        assert_eq!(generate_pair(&spec, 3), generate_pair(&spec, 3));
        assert_ne!(generate_pair(&spec, 3).0, generate_pair(&spec, 2).0);
        assert_eq!(generate_pair(&spec, 0).0.duration_ms(), 3000);
    }
}
