//! Where the token's recording comes from.

use std::path::Path;

use earshot_core::{decode_wav, resample, AudioSample, CANONICAL_FS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Result, TokenError};

/// RMS of the synthetic generator's output.
pub const SYNTHETIC_RMS: f64 = 0.1;

#[derive(Debug, Clone)]
pub enum AudioSource {
    /// A prerecorded clip, looped if shorter than the request.
    Fixture(AudioSample),
    /// Gaussian noise from a seeded generator.
    Synthetic { seed: u64 },
}

impl AudioSource {
    pub fn fixture(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| TokenError::File {
            path: path.into(),
            source,
        })?;
        Ok(AudioSource::Fixture(decode_wav(&bytes)?))
    }

    /// Exactly `record_ms` of audio at the canonical rate, stamped
    /// `captured_at` on whatever clock the caller uses.
    pub fn record(&self, record_ms: u32, captured_at: i64) -> Result<AudioSample> {
        let n = (record_ms as u64 * CANONICAL_FS as u64).div_ceil(1000) as usize;
        let pcm = match self {
            AudioSource::Fixture(s) => {
                let s = resample(s, CANONICAL_FS);
                let src = s.pcm();
                if src.is_empty() {
                    vec![0.0; n]
                } else {
                    src.iter().copied().cycle().take(n).collect()
                }
            }
            AudioSource::Synthetic { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let normal = Normal::new(0.0, SYNTHETIC_RMS).expect("positive deviation");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
        };
        Ok(AudioSample::from_clamped(
            pcm,
            CANONICAL_FS,
            captured_at,
            "phone",
        )?)
    }
}
