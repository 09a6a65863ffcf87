//! Exhaustive search for the band set and threshold minimizing a weighted
//! sum of FRR and FAR.

use earshot_core::{BandSet, ScoringPolicy, NOMINAL_CENTERS};
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::rates::{attack_scores, check_grid, legitimate_scores};
use crate::score::{PairScore, Scorer};
use crate::{EvalError, Result};

/// Lowest band centers tried, in Hz.
pub const LOW_RANGE: (f64, f64) = (50.0, 100.0);
/// Highest band centers tried, in Hz.
pub const HIGH_RANGE: (f64, f64) = (630.0, 8000.0);

/// Every contiguous band set whose lowest center is in [`LOW_RANGE`] and
/// highest in [`HIGH_RANGE`], narrowest high edge first.
pub fn search_space() -> Vec<BandSet> {
    let within = |(lo, hi): (f64, f64)| -> Vec<f64> {
        NOMINAL_CENTERS
            .iter()
            .copied()
            .filter(|c| (lo..=hi).contains(c))
            .collect()
    };
    let mut sets = Vec::new();
    for high in within(HIGH_RANGE) {
        for &low in within(LOW_RANGE).iter().rev() {
            sets.push(BandSet::new(low, high).expect("nominal centers"));
        }
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub band_set: BandSet,
    pub tau_c: f64,
    pub objective: f64,
    pub frr: f64,
    pub far: f64,
    /// Number of band sets searched.
    pub candidates: usize,
}

fn rates(legit: &[&PairScore], attacks: &[&PairScore], b: &BandSet, tau: f64) -> (f64, f64) {
    let rejected = legit.iter().filter(|s| !s.accepted(b, tau)).count();
    let accepted = attacks.iter().filter(|s| s.accepted(b, tau)).count();
    (
        rejected as f64 / legit.len() as f64,
        accepted as f64 / attacks.len() as f64,
    )
}

/// Minimizes `α·FRR + (1−α)·FAR` over [`search_space`] × `grid`, on already
/// scored non-quiet pairs. Ties go to fewer bands, then the lower threshold.
pub fn optimize_scored(
    legit: &[&PairScore],
    attacks: &[&PairScore],
    alpha: f64,
    grid: &[f64],
) -> Result<Optimum> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvalError::InvalidAlpha(alpha));
    }
    check_grid(grid)?;
    if legit.is_empty() || attacks.is_empty() {
        return Err(EvalError::Empty("need legitimate and attack pairs".into()));
    }
    let space = search_space();
    let mut best: Option<(Optimum, usize)> = None;
    for b in &space {
        for &tau in grid {
            let (frr, far) = rates(legit, attacks, b, tau);
            let f = alpha * frr + (1.0 - alpha) * far;
            let better = match &best {
                None => true,
                Some((o, len)) => (f, b.len(), tau) < (o.objective, *len, o.tau_c),
            };
            if better {
                best = Some((
                    Optimum {
                        band_set: *b,
                        tau_c: tau,
                        objective: f,
                        frr,
                        far,
                        candidates: space.len(),
                    },
                    b.len(),
                ));
            }
        }
    }
    Ok(best.expect("non-empty search").0)
}

/// Scores the manifest once over the union of all candidate bands, then
/// searches. `policy` supplies the lag window and power gate.
pub fn optimize_bands(
    m: &Manifest,
    policy: &ScoringPolicy,
    alpha: f64,
    grid: &[f64],
) -> Result<Optimum> {
    let union = BandSet::new(LOW_RANGE.0, HIGH_RANGE.1)?;
    let scorer = Scorer::for_policy(policy).with_range(union);
    let legit = legitimate_scores(m, &scorer)?;
    let attacks = attack_scores(m, &scorer)?;
    let live = |v: &[(String, PairScore)]| -> Vec<PairScore> {
        v.iter()
            .filter(|(_, s)| !s.quiet())
            .map(|(_, s)| s.clone())
            .collect()
    };
    let (legit, attacks) = (live(&legit), live(&attacks));
    optimize_scored(
        &legit.iter().collect::<Vec<_>>(),
        &attacks.iter().collect::<Vec<_>>(),
        alpha,
        grid,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_space_enumerates_every_combination() {
        let s = search_space();
        // Four low centers (50, 63, 80, 100) times twelve high (630 … 8000).
        assert_eq!(s.len(), 48);
        assert_eq!(s[0], BandSet::new(100.0, 630.0).unwrap());
        assert_eq!(*s.last().unwrap(), BandSet::new(50.0, 8000.0).unwrap());
        let mut dedup = s.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 48);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(matches!(
            optimize_scored(&[], &[], 1.0, &[0.1]),
            Err(EvalError::InvalidAlpha(_))
        ));
    }
}
