//! Scoring recording pairs once so that thresholds and band subsets can be
//! swept without re-running the correlation.

use earshot_core::{
    align, average_power_db_with_reference, band_scores, resample, AudioSample, BandSet,
    ScoringPolicy,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Powers and per-band peak correlations of one aligned pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub power_phone: f64,
    pub power_computer: f64,
    /// Per-band scores over the scorer's range; `None` for quiet pairs.
    bands: Option<Vec<f64>>,
    range: BandSet,
}

impl PairScore {
    /// Either recording failed the power gate.
    pub fn quiet(&self) -> bool {
        self.bands.is_none()
    }

    pub fn band_scores(&self) -> Option<&[f64]> {
        self.bands.as_deref()
    }

    /// Similarity over `b`, which must lie inside the scored range.
    pub fn similarity(&self, b: &BandSet) -> Option<f64> {
        assert!(
            self.range.contains(b),
            "{b} outside scored range {}",
            self.range
        );
        let bands = self.bands.as_ref()?;
        let start = b.indices().start - self.range.indices().start;
        let part = &bands[start..start + b.len()];
        Some(part.iter().sum::<f64>() / part.len() as f64)
    }

    /// The decision rule: not quiet and `S > tau_c`.
    pub fn accepted(&self, b: &BandSet, tau_c: f64) -> bool {
        self.similarity(b).is_some_and(|s| s > tau_c)
    }
}

/// Scoring parameters shared by every pair of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scorer {
    pub range: BandSet,
    pub ell_max_ms: f64,
    pub tau_db: f64,
    pub reference_db: f64,
}

impl Scorer {
    pub fn for_policy(p: &ScoringPolicy) -> Self {
        Self {
            range: p.band_set,
            ell_max_ms: p.ell_max_ms,
            tau_db: p.tau_db,
            reference_db: p.reference_db,
        }
    }

    pub fn with_range(self, range: BandSet) -> Self {
        Self { range, ..self }
    }

    /// Brings the computer recording to the phone's rate and trims both to
    /// their common window.
    pub fn prepare(
        phone: &AudioSample,
        computer: &AudioSample,
    ) -> Result<(AudioSample, AudioSample)> {
        let computer = resample(computer, phone.fs());
        Ok(align(phone, &computer)?)
    }

    pub fn score(&self, phone: &AudioSample, computer: &AudioSample) -> Result<PairScore> {
        let (p, c) = Self::prepare(phone, computer)?;
        let power_phone = average_power_db_with_reference(&p, self.reference_db);
        let power_computer = average_power_db_with_reference(&c, self.reference_db);
        let bands = if power_phone <= self.tau_db || power_computer <= self.tau_db {
            None
        } else {
            Some(band_scores(&p, &c, &self.range, self.ell_max_ms)?)
        };
        Ok(PairScore {
            power_phone,
            power_computer,
            bands,
            range: self.range,
        })
    }

    /// Scores pairs produced by `load` in parallel; results keep input order.
    pub fn score_all<T: Sync>(
        &self,
        items: &[T],
        load: impl Fn(&T) -> Result<(AudioSample, AudioSample)> + Sync,
    ) -> Result<Vec<PairScore>> {
        items
            .par_iter()
            .map(|it| {
                let (p, c) = load(it)?;
                self.score(&p, &c)
            })
            .collect()
    }
}
