//! False rejection and false acceptance rates, threshold sweeps and the
//! equal error rate.

use std::collections::BTreeMap;

use earshot_core::{AudioSample, BandSet, ScoringPolicy};
use serde::{Deserialize, Serialize};

use crate::manifest::{GroupBy, Manifest, ManifestEntry, Pairing};
use crate::score::{PairScore, Scorer};
use crate::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Frr,
    Far,
}

/// `numerator / denominator` for one group; quiet pairs are counted in
/// `excluded` and not in the denominator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRate {
    pub label: String,
    pub numerator: usize,
    pub denominator: usize,
    #[serde(default)]
    pub excluded: usize,
}

impl GroupRate {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            numerator: 0,
            denominator: 0,
            excluded: 0,
        }
    }

    /// Absent for an empty group.
    pub fn rate(&self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub frr: Option<f64>,
    pub far: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eer {
    pub tau: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub name: String,
    pub metric: Metric,
    pub overall: GroupRate,
    pub groups: Vec<GroupRate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<CurvePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eer: Option<Eer>,
}

impl RateReport {
    /// Tallies `(label, score)` pairs. For FRR the numerator counts
    /// rejections, for FAR acceptances.
    pub fn tally<'a>(
        name: impl Into<String>,
        metric: Metric,
        scored: impl IntoIterator<Item = (&'a str, &'a PairScore)>,
        bands: &BandSet,
        tau_c: f64,
    ) -> Self {
        let mut overall = GroupRate::new("all");
        let mut groups: BTreeMap<&str, GroupRate> = BTreeMap::new();
        for (label, s) in scored {
            let g = groups.entry(label).or_insert_with(|| GroupRate::new(label));
            if s.quiet() {
                g.excluded += 1;
                overall.excluded += 1;
                continue;
            }
            let hit = match metric {
                Metric::Frr => !s.accepted(bands, tau_c),
                Metric::Far => s.accepted(bands, tau_c),
            };
            for r in [&mut *g, &mut overall] {
                r.denominator += 1;
                r.numerator += hit as usize;
            }
        }
        Self {
            name: name.into(),
            metric,
            overall,
            groups: groups.into_values().collect(),
            curve: Vec::new(),
            eer: None,
        }
    }

    pub fn rate(&self) -> Option<f64> {
        self.overall.rate()
    }
}

fn load_pair(m: &Manifest, e: &ManifestEntry) -> Result<(AudioSample, AudioSample)> {
    Ok((
        m.read_audio(&e.phone_wav, e.phone_captured_at, "phone")?,
        m.read_audio(&e.computer_wav, e.computer_captured_at, "computer")?,
    ))
}

/// Scores every legitimate entry in manifest order.
pub fn legitimate_scores(m: &Manifest, scorer: &Scorer) -> Result<Vec<(String, PairScore)>> {
    let entries: Vec<&ManifestEntry> = m.legitimate().collect();
    let scores = scorer.score_all(&entries, |e| load_pair(m, e))?;
    Ok(entries
        .iter()
        .map(|e| e.environment.clone())
        .zip(scores)
        .collect())
}

/// FRR of the legitimate entries, per `group_by` label.
pub fn compute_frr(m: &Manifest, policy: &ScoringPolicy, group_by: GroupBy) -> Result<RateReport> {
    let entries: Vec<&ManifestEntry> = m.legitimate().collect();
    let scores = Scorer::for_policy(policy).score_all(&entries, |e| load_pair(m, e))?;
    Ok(RateReport::tally(
        format!("frr by {}", group_by.as_str()),
        Metric::Frr,
        entries.iter().map(|e| group_by.label(e)).zip(&scores),
        &policy.band_set,
        policy.tau_c,
    ))
}

/// An attack attempt: the victim's phone recording against another recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackPair {
    pub victim: usize,
    /// Entry supplying the computer recording; equal to `victim` for
    /// impostor entries.
    pub attacker: usize,
}

/// Impostor entries as they stand, then every victim phone recording against
/// every computer recording of another subject, in both role assignments.
pub fn attack_pairs(m: &Manifest) -> Result<Vec<AttackPair>> {
    let mut pairs: Vec<AttackPair> = m
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.pairing == Pairing::Impostor)
        .map(|(i, _)| AttackPair {
            victim: i,
            attacker: i,
        })
        .collect();
    let legit: Vec<usize> = m
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.pairing == Pairing::Legitimate)
        .map(|(i, _)| i)
        .collect();
    let mut subjects: Vec<&str> = legit
        .iter()
        .map(|&i| m.entries[i].subject.as_str())
        .collect();
    subjects.sort();
    subjects.dedup();
    if pairs.is_empty() && subjects.len() < 2 {
        return Err(EvalError::SingleSubject);
    }
    for &v in &legit {
        for &a in &legit {
            if m.entries[v].subject != m.entries[a].subject {
                pairs.push(AttackPair {
                    victim: v,
                    attacker: a,
                });
            }
        }
    }
    Ok(pairs)
}

/// Scores attack pairs. A cross-subject attacker's recording is restamped
/// with the victim's capture time, i.e. the attacker is perfectly in sync.
pub fn attack_scores(m: &Manifest, scorer: &Scorer) -> Result<Vec<(String, PairScore)>> {
    let pairs = attack_pairs(m)?;
    let scores = scorer.score_all(&pairs, |p| {
        let v = &m.entries[p.victim];
        if p.victim == p.attacker {
            return load_pair(m, v);
        }
        let a = &m.entries[p.attacker];
        Ok((
            m.read_audio(&v.phone_wav, v.phone_captured_at, "phone")?,
            m.read_audio(&a.computer_wav, v.phone_captured_at, "attacker")?,
        ))
    })?;
    Ok(pairs
        .iter()
        .map(|p| m.entries[p.victim].environment.clone())
        .zip(scores)
        .collect())
}

/// FAR over all attack pairs, broken down by the victim's environment.
pub fn compute_far(m: &Manifest, policy: &ScoringPolicy) -> Result<RateReport> {
    let scored = attack_scores(m, &Scorer::for_policy(policy))?;
    Ok(RateReport::tally(
        "far by environment",
        Metric::Far,
        scored.iter().map(|(l, s)| (l.as_str(), s)),
        &policy.band_set,
        policy.tau_c,
    ))
}

/// `0, step, 2·step, …, 1`, with values rounded to 1e-9 so they print cleanly.
pub fn tau_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(EvalError::InvalidGrid(format!("step {step}")));
    }
    let n = (1.0 / step).round() as usize;
    let mut g: Vec<f64> = (0..=n)
        .map(|i| ((i as f64 * step) * 1e9).round() / 1e9)
        .filter(|&t| t <= 1.0)
        .collect();
    if *g.last().unwrap() < 1.0 {
        g.push(1.0);
    }
    Ok(g)
}

/// Parses `lo:hi:step` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || EvalError::InvalidGrid(s.to_string());
    let grid: Vec<f64> = if let [lo, hi, step] = s.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi, step): (f64, f64, f64) = (
            lo.parse().map_err(|_| bad())?,
            hi.parse().map_err(|_| bad())?,
            step.parse().map_err(|_| bad())?,
        );
        if step.is_nan() || step <= 0.0 || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
            .collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    check_grid(&grid)?;
    Ok(grid)
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(EvalError::InvalidGrid("empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidGrid(
            "must be finite and strictly ascending".into(),
        ));
    }
    Ok(())
}

fn fraction(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

/// FRR and FAR at each threshold: a legitimate score `≤ τ` is a false
/// rejection, an impostor score `> τ` a false acceptance.
pub fn sweep(legit: &[f64], impostor: &[f64], grid: &[f64]) -> Result<Vec<CurvePoint>> {
    check_grid(grid)?;
    let mut l = legit.to_vec();
    let mut i = impostor.to_vec();
    l.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    Ok(grid
        .iter()
        .map(|&tau| {
            let rejected = l.partition_point(|&s| s <= tau);
            let accepted = i.len() - i.partition_point(|&s| s <= tau);
            CurvePoint {
                tau,
                frr: fraction(rejected, l.len()),
                far: fraction(accepted, i.len()),
            }
        })
        .collect())
}

/// Where FRR meets FAR, interpolating linearly between grid points. Outside
/// the grid's crossing range the nearest end point is reported with the
/// mean of the two rates.
pub fn equal_error(curve: &[CurvePoint]) -> Option<Eer> {
    let pts: Vec<(f64, f64, f64)> = curve
        .iter()
        .filter_map(|c| Some((c.tau, c.frr?, c.far?)))
        .collect();
    let first = pts.iter().position(|&(_, frr, far)| frr - far >= 0.0);
    match first {
        Some(0) | None => {
            let &(tau, frr, far) = if first.is_some() {
                pts.first()?
            } else {
                pts.last()?
            };
            Some(Eer {
                tau,
                rate: (frr + far) / 2.0,
            })
        }
        Some(k) => {
            let (t1, r1, a1) = pts[k];
            let d1 = r1 - a1;
            if d1 == 0.0 {
                return Some(Eer { tau: t1, rate: r1 });
            }
            let (t0, r0, a0) = pts[k - 1];
            let d0 = r0 - a0;
            let w = d0 / (d0 - d1);
            Some(Eer {
                tau: t0 + w * (t1 - t0),
                rate: r0 + w * (r1 - r0),
            })
        }
    }
}

/// Sweeps the threshold over legitimate entries and attack pairs at a fixed
/// band set, reporting the curve and the EER. Quiet pairs are excluded.
pub fn sweep_eer(m: &Manifest, policy: &ScoringPolicy, grid: &[f64]) -> Result<RateReport> {
    check_grid(grid)?;
    let scorer = Scorer::for_policy(policy);
    let legit = legitimate_scores(m, &scorer)?;
    let attacks = attack_scores(m, &scorer)?;
    let b = policy.band_set;
    let values = |v: &[(String, PairScore)]| -> Vec<f64> {
        v.iter().filter_map(|(_, s)| s.similarity(&b)).collect()
    };
    let curve = sweep(&values(&legit), &values(&attacks), grid)?;
    let mut report = RateReport::tally(
        format!("sweep {b}"),
        Metric::Frr,
        legit.iter().map(|(l, s)| (l.as_str(), s)),
        &b,
        policy.tau_c,
    );
    report.eer = equal_error(&curve);
    report.curve = curve;
    Ok(report)
}
