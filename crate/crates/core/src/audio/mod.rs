//! Audio samples and the DSP operations applied to them.

mod bands;
mod fft;
mod power;
mod resample;
mod similarity;
mod wav;
mod xcorr;

pub use bands::{band_edges, split_bands, BandComponents, BandSet, NOMINAL_CENTERS};
pub use power::{average_power_db, average_power_db_with_reference, DEFAULT_REFERENCE_DB};
pub use resample::resample;
pub use similarity::{band_scores, similarity_score};
pub use wav::{decode_wav, encode_wav, quantize_i16};
pub use xcorr::{
    cross_correlation, normalized_cross_correlation, normalized_max_xcorr, CorrelationSeries,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rate every recording is brought to before scoring.
pub const CANONICAL_FS: u32 = 44_100;

/// A mono recording with its capture time on the server clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSample {
    pcm: Vec<f64>,
    fs: u32,
    captured_at: i64,
    duration_ms: i64,
    device_id: String,
}

impl AudioSample {
    /// Builds a sample, rejecting amplitudes outside `[-1, 1]` and non-finite values.
    ///
    /// `duration_ms` is derived from the sample count, rounded to the nearest
    /// millisecond.
    pub fn new(
        pcm: Vec<f64>,
        fs: u32,
        captured_at: i64,
        device_id: impl Into<String>,
    ) -> Result<Self> {
        if fs == 0 {
            return Err(Error::InvalidSample(
                "sampling rate must be positive".into(),
            ));
        }
        if let Some(bad) = pcm.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidSample(format!(
                "amplitude {bad} outside [-1, 1]"
            )));
        }
        let duration_ms = samples_to_ms(pcm.len(), fs);
        Ok(Self {
            pcm,
            fs,
            captured_at,
            duration_ms,
            device_id: device_id.into(),
        })
    }

    /// Like [`AudioSample::new`], but clamps out-of-range amplitudes and maps
    /// non-finite values to zero instead of failing.
    pub fn from_clamped(
        pcm: Vec<f64>,
        fs: u32,
        captured_at: i64,
        device_id: impl Into<String>,
    ) -> Result<Self> {
        let pcm = pcm
            .into_iter()
            .map(|v| {
                if v.is_finite() {
                    v.clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(pcm, fs, captured_at, device_id)
    }

    pub fn pcm(&self) -> &[f64] {
        &self.pcm
    }

    pub fn into_pcm(self) -> Vec<f64> {
        self.pcm
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn captured_at(&self) -> i64 {
        self.captured_at
    }

    pub fn duration_ms(&self) -> i64 {
        self.duration_ms
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn len(&self) -> usize {
        self.pcm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pcm.is_empty()
    }

    pub fn with_captured_at(mut self, captured_at: i64) -> Self {
        self.captured_at = captured_at;
        self
    }

    pub fn with_device_id(mut self, device_id: impl Into<String>) -> Self {
        self.device_id = device_id.into();
        self
    }

    /// Sub-range `[start, end)` of the samples; the capture time moves with `start`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.pcm.len());
        let start = start.min(end);
        let pcm = self.pcm[start..end].to_vec();
        Self {
            duration_ms: samples_to_ms(pcm.len(), self.fs),
            captured_at: self.captured_at + samples_to_ms(start, self.fs),
            pcm,
            fs: self.fs,
            device_id: self.device_id.clone(),
        }
    }
}

pub fn samples_to_ms(samples: usize, fs: u32) -> i64 {
    (samples as f64 * 1000.0 / fs as f64).round() as i64
}

pub fn ms_to_samples(ms: f64, fs: u32) -> usize {
    (ms / 1000.0 * fs as f64).round().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_amplitude() {
        assert!(AudioSample::new(vec![0.0, 1.5], 8000, 0, "d").is_err());
        assert!(AudioSample::new(vec![f64::NAN], 8000, 0, "d").is_err());
        assert!(AudioSample::new(vec![0.1], 0, 0, "d").is_err());
    }

    #[test]
    fn duration_follows_length() {
        let s = AudioSample::new(vec![0.0; 132_300], CANONICAL_FS, 0, "d").unwrap();
        assert_eq!(s.duration_ms(), 3000);
    }

    #[test]
    fn slice_moves_timestamp() {
        let s = AudioSample::new(vec![0.0; 44_100], CANONICAL_FS, 1_000, "d").unwrap();
        let t = s.slice(4_410, 44_100);
        assert_eq!(t.captured_at(), 1_100);
        assert_eq!(t.duration_ms(), 900);
    }

    #[test]
    fn clamped_constructor() {
        let s = AudioSample::from_clamped(vec![2.0, -3.0, f64::INFINITY], 100, 0, "d").unwrap();
        assert_eq!(s.pcm(), &[1.0, -1.0, 0.0]);
    }
}
