//! Acceptance rule for a phone/computer recording pair.
//!
//! A login is accepted when both recordings are louder than the power gate
//! and their similarity score strictly exceeds the threshold. The power gates
//! are checked first, so a quiet pair is rejected without scoring.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audio::{average_power_db_with_reference, similarity_score, AudioSample, BandSet};
use crate::{Error, Result, DEFAULT_REFERENCE_DB};

/// Thresholds and band selection governing a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRecord", into = "PolicyRecord")]
pub struct ScoringPolicy {
    pub tau_c: f64,
    pub tau_db: f64,
    pub ell_max_ms: f64,
    pub band_set: BandSet,
    /// Calibration offset used when measuring average power.
    pub reference_db: f64,
}

/// Flat key/value form of a [`ScoringPolicy`], as stored in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRecord {
    pub tau_c: f64,
    pub tau_db: f64,
    pub ell_max_ms: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    #[serde(default = "default_reference_db")]
    pub power_reference_db: f64,
}

fn default_reference_db() -> f64 {
    DEFAULT_REFERENCE_DB
}

impl TryFrom<PolicyRecord> for ScoringPolicy {
    type Error = Error;

    fn try_from(r: PolicyRecord) -> Result<Self> {
        let mut p = ScoringPolicy::new(
            r.tau_c,
            r.tau_db,
            r.ell_max_ms,
            BandSet::new(r.band_low_hz, r.band_high_hz)?,
        )?;
        p.reference_db = r.power_reference_db;
        Ok(p)
    }
}

impl From<ScoringPolicy> for PolicyRecord {
    fn from(p: ScoringPolicy) -> Self {
        PolicyRecord {
            tau_c: p.tau_c,
            tau_db: p.tau_db,
            ell_max_ms: p.ell_max_ms,
            band_low_hz: p.band_set.low_center(),
            band_high_hz: p.band_set.high_center(),
            power_reference_db: p.reference_db,
        }
    }
}

impl ScoringPolicy {
    pub fn new(tau_c: f64, tau_db: f64, ell_max_ms: f64, band_set: BandSet) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau_c) {
            return Err(Error::InvalidPolicy(format!(
                "tau_c {tau_c} outside [0, 1]"
            )));
        }
        if !(ell_max_ms >= 0.0 && ell_max_ms.is_finite()) {
            return Err(Error::InvalidPolicy(format!(
                "ell_max_ms {ell_max_ms} must be >= 0"
            )));
        }
        if tau_db.is_nan() {
            return Err(Error::InvalidPolicy("tau_db is NaN".into()));
        }
        Ok(Self {
            tau_c,
            tau_db,
            ell_max_ms,
            band_set,
            reference_db: DEFAULT_REFERENCE_DB,
        })
    }

    pub fn with_tau_c(self, tau_c: f64) -> Result<Self> {
        Self { tau_c, ..self }.validated()
    }

    pub fn with_band_set(self, band_set: BandSet) -> Self {
        Self { band_set, ..self }
    }

    fn validated(self) -> Result<Self> {
        let mut p = Self::new(self.tau_c, self.tau_db, self.ell_max_ms, self.band_set)?;
        p.reference_db = self.reference_db;
        Ok(p)
    }
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        default_policy()
    }
}

/// τ_C = 0.13, τ_dB = 40 dB, ℓ_max = 150 ms, B = [50 Hz, 4 kHz].
pub fn default_policy() -> ScoringPolicy {
    ScoringPolicy::new(
        0.13,
        40.0,
        150.0,
        BandSet::new(50.0, 4000.0).expect("nominal centers"),
    )
    .expect("valid constants")
}

/// Band set and threshold minimizing `α·FRR + (1−α)·FAR` for the nine
/// tabulated weights `α ∈ {0.1, …, 0.9}`.
pub fn policy_for_weighting(alpha: f64) -> Result<ScoringPolicy> {
    const TABLE: [(f64, f64, f64); 9] = [
        (80.0, 2500.0, 0.12),
        (50.0, 2500.0, 0.14),
        (50.0, 2500.0, 0.14),
        (50.0, 800.0, 0.19),
        (50.0, 800.0, 0.19),
        (50.0, 800.0, 0.19),
        (50.0, 1000.0, 0.20),
        (50.0, 1000.0, 0.20),
        (50.0, 1250.0, 0.21),
    ];
    let tenths = (alpha * 10.0).round();
    if !(1.0..=9.0).contains(&tenths) || (alpha * 10.0 - tenths).abs() > 1e-9 {
        return Err(Error::UntabulatedAlpha(alpha));
    }
    let (low, high, tau_c) = TABLE[tenths as usize - 1];
    ScoringPolicy::new(tau_c, 40.0, 150.0, BandSet::new(low, high)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Ok,
    PhoneTooQuiet,
    ComputerTooQuiet,
    LowSimilarity,
}

impl Reason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reason::Ok => "OK",
            Reason::PhoneTooQuiet => "PHONE_TOO_QUIET",
            Reason::ComputerTooQuiet => "COMPUTER_TOO_QUIET",
            Reason::LowSimilarity => "LOW_SIMILARITY",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    pub score: Option<f64>,
    pub power_phone: f64,
    pub power_computer: f64,
    pub reason: Reason,
}

/// Scores an aligned, equal-rate pair and applies `p`.
pub fn evaluate(phone: &AudioSample, computer: &AudioSample, p: &ScoringPolicy) -> Result<Verdict> {
    if phone.fs() != computer.fs() {
        return Err(Error::FsMismatch(phone.fs(), computer.fs()));
    }
    if phone.len() != computer.len() {
        return Err(Error::LengthMismatch(phone.len(), computer.len()));
    }
    let power_phone = average_power_db_with_reference(phone, p.reference_db);
    let power_computer = average_power_db_with_reference(computer, p.reference_db);
    decide(p, power_phone, power_computer, || {
        similarity_score(phone, computer, &p.band_set, p.ell_max_ms)
    })
}

/// Applies the rule to already-measured powers; `score` runs only if both gates pass.
pub fn decide(
    p: &ScoringPolicy,
    power_phone: f64,
    power_computer: f64,
    score: impl FnOnce() -> Result<f64>,
) -> Result<Verdict> {
    let quiet = if power_phone <= p.tau_db {
        Some(Reason::PhoneTooQuiet)
    } else if power_computer <= p.tau_db {
        Some(Reason::ComputerTooQuiet)
    } else {
        None
    };
    if let Some(reason) = quiet {
        return Ok(Verdict {
            accepted: false,
            score: None,
            power_phone,
            power_computer,
            reason,
        });
    }
    let s = score()?;
    let accepted = s > p.tau_c;
    Ok(Verdict {
        accepted,
        score: Some(s),
        power_phone,
        power_computer,
        reason: if accepted {
            Reason::Ok
        } else {
            Reason::LowSimilarity
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(s: f64) -> impl FnOnce() -> Result<f64> {
        move || Ok(s)
    }

    #[test]
    fn loud_and_similar_is_accepted() {
        let v = decide(&default_policy(), 55.0, 60.0, fixed(0.40)).unwrap();
        assert!(v.accepted);
        assert_eq!(v.reason, Reason::Ok);
        assert_eq!(v.score, Some(0.40));
    }

    #[test]
    fn quiet_phone_is_rejected_without_scoring() {
        let v = decide(&default_policy(), 30.0, 60.0, || panic!("must not score")).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.reason, Reason::PhoneTooQuiet);
        assert_eq!(v.score, None);
        let v = decide(&default_policy(), 60.0, 40.0, || panic!("must not score")).unwrap();
        assert_eq!(v.reason, Reason::ComputerTooQuiet);
    }

    #[test]
    fn low_similarity_is_rejected() {
        let v = decide(&default_policy(), 55.0, 60.0, fixed(0.10)).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.reason, Reason::LowSimilarity);
    }

    #[test]
    fn threshold_is_strict() {
        let v = decide(&default_policy(), 55.0, 60.0, fixed(0.13)).unwrap();
        assert!(!v.accepted);
    }

    #[test]
    fn silent_phone_sample_is_rejected() {
        let z = AudioSample::new(vec![0.0; 44_100], 44_100, 0, "").unwrap();
        let loud = AudioSample::new(vec![0.3; 44_100], 44_100, 0, "").unwrap();
        let v = evaluate(&z, &loud, &default_policy()).unwrap();
        assert_eq!(v.reason, Reason::PhoneTooQuiet);
    }

    #[test]
    fn default_values() {
        let p = default_policy();
        assert_eq!(p.tau_c, 0.13);
        assert_eq!(p.tau_db, 40.0);
        assert_eq!(p.ell_max_ms, 150.0);
        assert_eq!(p.band_set.len(), 20);
        assert_eq!(p.reference_db, 96.0);
    }

    #[test]
    fn weighting_table() {
        let p = policy_for_weighting(0.1).unwrap();
        assert_eq!(
            (p.band_set.low_center(), p.band_set.high_center(), p.tau_c),
            (80.0, 2500.0, 0.12)
        );
        let p = policy_for_weighting(0.5).unwrap();
        assert_eq!(
            (p.band_set.low_center(), p.band_set.high_center(), p.tau_c),
            (50.0, 800.0, 0.19)
        );
        let p = policy_for_weighting(0.9).unwrap();
        assert_eq!(
            (p.band_set.low_center(), p.band_set.high_center(), p.tau_c),
            (50.0, 1250.0, 0.21)
        );
        assert_eq!(p.tau_db, 40.0);
        assert_eq!(p.ell_max_ms, 150.0);
        for bad in [0.0, 0.05, 0.55, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                policy_for_weighting(bad),
                Err(Error::UntabulatedAlpha(_))
            ));
        }
    }

    #[test]
    fn record_round_trip() {
        let json = serde_json::to_value(default_policy()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "tau_c": 0.13, "tau_db": 40.0, "ell_max_ms": 150.0,
                "band_low_hz": 50.0, "band_high_hz": 4000.0, "power_reference_db": 96.0
            })
        );
        let back: ScoringPolicy = serde_json::from_value(json).unwrap();
        assert_eq!(back, default_policy());
        let minimal: ScoringPolicy = serde_json::from_str(
            r#"{"tau_c":0.2,"tau_db":35,"ell_max_ms":100,"band_low_hz":63,"band_high_hz":1000}"#,
        )
        .unwrap();
        assert_eq!(minimal.reference_db, 96.0);
        assert!(serde_json::from_str::<ScoringPolicy>(
            r#"{"tau_c":1.2,"tau_db":35,"ell_max_ms":100,"band_low_hz":63,"band_high_hz":1000}"#
        )
        .is_err());
    }

    #[test]
    fn invalid_policies() {
        let b = BandSet::new(50.0, 4000.0).unwrap();
        assert!(ScoringPolicy::new(-0.1, 40.0, 150.0, b).is_err());
        assert!(ScoringPolicy::new(0.1, 40.0, -1.0, b).is_err());
        assert!(default_policy().with_tau_c(2.0).is_err());
    }
}
