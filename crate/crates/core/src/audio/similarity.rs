use rayon::prelude::*;

use super::bands::{BandMask, BandSet};
use super::fft::{self, C64};
use super::xcorr::{energy, peak_normalized};
use super::{ms_to_samples, AudioSample};
use crate::{Error, Result};

/// Band energy, relative to the pair's total, treated as zero (-240 dB).
const SILENCE_FLOOR: f64 = 1e-24;

/// Similarity score: the mean over the bands of `b` of the peak normalized
/// cross-correlation between the two recordings' band components, searched
/// over lags within `±ell_max_ms`.
pub fn similarity_score(
    x: &AudioSample,
    y: &AudioSample,
    b: &BandSet,
    ell_max_ms: f64,
) -> Result<f64> {
    let scores = band_scores(x, y, b, ell_max_ms)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Per-band peak normalized cross-correlations, in band order.
///
/// Bands are processed in parallel; the result does not depend on scheduling.
pub fn band_scores(
    x: &AudioSample,
    y: &AudioSample,
    b: &BandSet,
    ell_max_ms: f64,
) -> Result<Vec<f64>> {
    if x.fs() != y.fs() {
        return Err(Error::FsMismatch(x.fs(), y.fs()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    b.check_nyquist(x.fs())?;
    let n = x.len();
    let fs = x.fs();
    let max_lag = ms_to_samples(ell_max_ms.max(0.0), fs);
    // Rounding leaks ~1e-16 of one signal's amplitude into the other's band
    // components; anything this far below the inputs' energy is silence.
    let energy_floor = SILENCE_FLOOR * (energy(x.pcm()) + energy(y.pcm()));

    // One transform of x + iy carries both spectra; masking it with a real,
    // symmetric gain and inverting yields the x band in the real part and the
    // y band in the imaginary part.
    let mut packed: Vec<C64> = x
        .pcm()
        .iter()
        .zip(y.pcm())
        .map(|(&a, &b)| C64::new(a, b))
        .collect();
    fft::forward(&mut packed);

    Ok(b.centers()
        .par_iter()
        .map(|&center| {
            let mask = BandMask::new(center, n, fs);
            let mut buf = vec![C64::new(0.0, 0.0); n];
            mask.apply(&packed, &mut buf);
            fft::inverse(&mut buf);
            let scale = 1.0 / n as f64;
            let xi: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
            let yi: Vec<f64> = buf.iter().map(|c| c.im * scale).collect();
            peak_normalized(&xi, &yi, max_lag, energy_floor)
        })
        .collect())
}
