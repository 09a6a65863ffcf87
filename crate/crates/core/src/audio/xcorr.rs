use super::fft::{self, C64};
use crate::{Error, Result};

/// Correlation values over the symmetric lag window `[-max_lag, +max_lag]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    max_lag: usize,
    values: Vec<f64>,
}

impl CorrelationSeries {
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Value at `lag` samples, or `None` outside the window.
    pub fn at(&self, lag: isize) -> Option<f64> {
        let idx = lag + self.max_lag as isize;
        (idx >= 0)
            .then(|| self.values.get(idx as usize).copied())
            .flatten()
    }

    /// `(lag, value)` pairs from `-max_lag` upwards.
    pub fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let offset = self.max_lag as isize;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as isize - offset, v))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lag and value of the largest absolute entry.
    pub fn peak(&self) -> (isize, f64) {
        self.iter().fold(
            (0, 0.0),
            |best, (l, v)| if v.abs() > best.1.abs() { (l, v) } else { best },
        )
    }
}

/// Full linear cross-correlation `c(l) = Σ_i x(i)·y(i−l)` for `l ∈ [−(n−1), n−1]`,
/// computed through a zero-padded FFT of length at least `2n − 1`.
pub fn cross_correlation(x: &[f64], y: &[f64]) -> Result<CorrelationSeries> {
    check_lengths(x, y)?;
    let max_lag = x.len().saturating_sub(1);
    Ok(CorrelationSeries {
        max_lag,
        values: windowed(x, y, max_lag),
    })
}

/// `c(l) / sqrt(c_xx(0)·c_yy(0))` over `[-max_lag, +max_lag]`.
///
/// A signal with zero energy makes the normalization undefined; the series is
/// then all zeros.
pub fn normalized_cross_correlation(
    x: &[f64],
    y: &[f64],
    max_lag: usize,
) -> Result<CorrelationSeries> {
    check_lengths(x, y)?;
    let max_lag = max_lag.min(x.len().saturating_sub(1));
    let norm = (energy(x) * energy(y)).sqrt();
    let values = if norm > 0.0 && norm.is_finite() {
        windowed(x, y, max_lag)
            .into_iter()
            .map(|v| (v / norm).clamp(-1.0, 1.0))
            .collect()
    } else {
        vec![0.0; 2 * max_lag + 1]
    };
    Ok(CorrelationSeries { max_lag, values })
}

/// Peak absolute normalized cross-correlation within `[-max_lag, +max_lag]`, in `[0, 1]`.
/// Returns 0 when either signal has zero energy.
pub fn normalized_max_xcorr(x: &[f64], y: &[f64], max_lag: usize) -> Result<f64> {
    check_lengths(x, y)?;
    Ok(peak_normalized(x, y, max_lag, 0.0))
}

/// Peak normalized correlation; a signal whose energy is at or below
/// `energy_floor` counts as silent.
pub(crate) fn peak_normalized(x: &[f64], y: &[f64], max_lag: usize, energy_floor: f64) -> f64 {
    let (ex, ey) = (energy(x), energy(y));
    if ex <= energy_floor || ey <= energy_floor {
        return 0.0;
    }
    let norm = (ex * ey).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return 0.0;
    }
    let max_lag = max_lag.min(x.len().saturating_sub(1));
    let peak = windowed(x, y, max_lag)
        .into_iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    (peak / norm).min(1.0)
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        Err(Error::LengthMismatch(x.len(), y.len()))
    } else {
        Ok(())
    }
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Raw correlation for lags `-max_lag..=max_lag`, `max_lag < n`.
///
/// A circular correlation of length `M ≥ n + max_lag` has no wrap-around
/// inside the window, so the transform never needs the full `2n − 1`.
fn windowed(x: &[f64], y: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0];
    }
    let m = fft::fast_len(n + max_lag);
    let (sx, sy) = fft::real_pair_spectra(x, y, m);
    let mut cross: Vec<C64> = sx.iter().zip(&sy).map(|(a, b)| a * b.conj()).collect();
    fft::inverse(&mut cross);
    let scale = 1.0 / m as f64;
    (-(max_lag as isize)..=max_lag as isize)
        .map(|l| cross[l.rem_euclid(m as isize) as usize].re * scale)
        .collect()
}
