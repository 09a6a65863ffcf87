use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::fft::{self, C64};
use super::AudioSample;
use crate::{Error, Result};

/// The 32 standardized nominal one-third octave center frequencies in Hz.
pub const NOMINAL_CENTERS: [f64; 32] = [
    16.0, 20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0, 250.0, 315.0,
    400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0, 5000.0,
    6300.0, 8000.0, 10000.0, 12500.0, 16000.0, 20000.0,
];

/// Raised-cosine crossover width at each band edge, in octaves.
const TRANSITION_OCTAVES: f64 = 1.0 / 12.0;

/// Lower and upper edge of the one-third octave band around `center`:
/// `center · 2^(∓1/6)`.
pub fn band_edges(center: f64) -> (f64, f64) {
    let k = 2f64.powf(1.0 / 6.0);
    (center / k, center * k)
}

/// A contiguous run of nominal one-third octave bands.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BandSetRepr", into = "BandSetRepr")]
pub struct BandSet {
    low: usize,
    high: usize,
}

#[derive(Serialize, Deserialize)]
struct BandSetRepr {
    low_center: f64,
    high_center: f64,
}

impl TryFrom<BandSetRepr> for BandSet {
    type Error = Error;

    fn try_from(r: BandSetRepr) -> Result<Self> {
        BandSet::new(r.low_center, r.high_center)
    }
}

impl From<BandSet> for BandSetRepr {
    fn from(b: BandSet) -> Self {
        BandSetRepr {
            low_center: b.low_center(),
            high_center: b.high_center(),
        }
    }
}

impl BandSet {
    /// Bands from `low_center` to `high_center` inclusive; both must be nominal centers.
    pub fn new(low_center: f64, high_center: f64) -> Result<Self> {
        let low = center_index(low_center)?;
        let high = center_index(high_center)?;
        Self::from_indices(low, high)
    }

    /// Bands by position in [`NOMINAL_CENTERS`], inclusive.
    pub fn from_indices(low: usize, high: usize) -> Result<Self> {
        if high >= NOMINAL_CENTERS.len() || low > high {
            return Err(Error::InvalidBandSet(format!(
                "band index range {low}..={high} is empty or out of range"
            )));
        }
        Ok(Self { low, high })
    }

    pub fn low_center(&self) -> f64 {
        NOMINAL_CENTERS[self.low]
    }

    pub fn high_center(&self) -> f64 {
        NOMINAL_CENTERS[self.high]
    }

    pub fn centers(&self) -> &'static [f64] {
        &NOMINAL_CENTERS[self.low..=self.high]
    }

    /// Positions of the bands in [`NOMINAL_CENTERS`].
    pub fn indices(&self) -> Range<usize> {
        self.low..self.high + 1
    }

    pub fn len(&self) -> usize {
        self.high - self.low + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &BandSet) -> bool {
        self.low <= other.low && other.high <= self.high
    }

    /// Highest frequency any band's filter passes, including its crossover skirt.
    pub fn upper_edge_hz(&self) -> f64 {
        band_edges(self.high_center()).1
    }

    pub(crate) fn check_nyquist(&self, fs: u32) -> Result<()> {
        let edge = self.upper_edge_hz();
        if fs as f64 / 2.0 > edge {
            Ok(())
        } else {
            Err(Error::FsTooLow { fs, edge_hz: edge })
        }
    }
}

impl fmt::Debug for BandSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BandSet[{}Hz-{}Hz]",
            self.low_center(),
            self.high_center()
        )
    }
}

impl fmt::Display for BandSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Hz-{}Hz", self.low_center(), self.high_center())
    }
}

fn center_index(center: f64) -> Result<usize> {
    NOMINAL_CENTERS
        .iter()
        .position(|&c| (c - center).abs() < 1e-6)
        .ok_or_else(|| Error::InvalidBandSet(format!("{center} Hz is not a nominal center")))
}

/// Per-band filtered copies of one signal, in band order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandComponents {
    pub bands: BandSet,
    pub fs: u32,
    pub components: Vec<Vec<f64>>,
}

/// Frequency-domain gain of one band over the positive-frequency bins it touches.
pub(crate) struct BandMask {
    pub(crate) first_bin: usize,
    pub(crate) gains: Vec<f64>,
}

impl BandMask {
    pub(crate) fn new(center: f64, n: usize, fs: u32) -> Self {
        let (low, high) = band_edges(center);
        let skirt = 2f64.powf(TRANSITION_OCTAVES / 2.0);
        let bin_hz = fs as f64 / n as f64;
        let first_bin = ((low / skirt) / bin_hz).floor().max(1.0) as usize;
        let last_bin = (((high * skirt) / bin_hz).ceil() as usize).min(n / 2);
        let gains = (first_bin..=last_bin)
            .map(|k| band_gain(k as f64 * bin_hz, low, high))
            .collect();
        Self { first_bin, gains }
    }

    /// Writes `gain · spectrum` into `out` for this band's bins and their mirror images.
    pub(crate) fn apply(&self, spectrum: &[C64], out: &mut [C64]) {
        let n = spectrum.len();
        for (i, &g) in self.gains.iter().enumerate() {
            let k = self.first_bin + i;
            out[k] = spectrum[k] * g;
            let mirror = n - k;
            if mirror != k {
                out[mirror] = spectrum[mirror] * g;
            }
        }
    }
}

/// Unity between the edges, raised-cosine crossover (in log frequency) of
/// width [`TRANSITION_OCTAVES`] centred on each edge, zero beyond. Adjacent
/// bands whose edges coincide sum to one across the crossover.
fn band_gain(freq: f64, low: f64, high: f64) -> f64 {
    if freq <= 0.0 {
        return 0.0;
    }
    let half = TRANSITION_OCTAVES / 2.0;
    let rise = |u: f64| -> f64 {
        if u <= -half {
            0.0
        } else if u >= half {
            1.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * u / TRANSITION_OCTAVES).sin())
        }
    };
    rise((freq / low).log2()) * rise((high / freq).log2())
}

/// Zero-phase band splitting by spectral masking.
///
/// The whole signal is transformed once; each band keeps the bins inside its
/// edges (with a short raised-cosine crossover) and is transformed back. There
/// is no group delay, so the components stay time-aligned with the input.
pub fn split_bands(s: &AudioSample, b: &BandSet) -> Result<BandComponents> {
    b.check_nyquist(s.fs())?;
    let n = s.len();
    let mut spectrum: Vec<C64> = s.pcm().iter().map(|&v| C64::new(v, 0.0)).collect();
    fft::forward(&mut spectrum);
    let components = b
        .centers()
        .iter()
        .map(|&center| band_from_spectrum(&spectrum, &BandMask::new(center, n, s.fs())))
        .collect();
    Ok(BandComponents {
        bands: *b,
        fs: s.fs(),
        components,
    })
}

fn band_from_spectrum(spectrum: &[C64], mask: &BandMask) -> Vec<f64> {
    let n = spectrum.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = vec![C64::new(0.0, 0.0); n];
    mask.apply(spectrum, &mut buf);
    fft::inverse(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn edges_of_lowest_and_highest_band() {
        // Nominal 16 Hz sits 1 % above the exact base-ten center 15.85 Hz,
        // so its edges land ~1 % above the tabulated 14.1 / 17.8 Hz.
        let (lo, hi) = band_edges(16.0);
        assert!((lo - 14.254_379).abs() < 1e-5 && (hi - 17.959_393).abs() < 1e-5);
        assert!((lo - 14.1).abs() / 14.1 < 0.012 && (hi - 17.8).abs() / 17.8 < 0.012);
        let (lo, hi) = band_edges(20_000.0);
        assert!((lo - 17_817.97).abs() < 0.01, "{lo}");
        assert!((hi - 22_449.24).abs() < 0.01, "{hi}");
        // Nominal standard edges 17780/22390 agree within 0.3 %.
        assert!((lo - 17_780.0).abs() / 17_780.0 < 0.003);
        assert!((hi - 22_390.0).abs() / 22_390.0 < 0.003);
    }

    #[test]
    fn edges_of_1k_band() {
        let (lo, hi) = band_edges(1000.0);
        assert!((lo - 890.898_718).abs() < 1e-5);
        assert!((hi - 1_122.462_048).abs() < 1e-5);
    }

    #[test]
    fn band_set_enumeration() {
        let b = BandSet::new(50.0, 4000.0).unwrap();
        assert_eq!(b.len(), 20);
        assert_eq!(b.centers().first(), Some(&50.0));
        assert_eq!(b.centers().last(), Some(&4000.0));
        assert_eq!(BandSet::new(16.0, 20_000.0).unwrap().len(), 32);
        assert!(BandSet::new(55.0, 4000.0).is_err());
        assert!(BandSet::new(4000.0, 50.0).is_err());
    }

    #[test]
    fn band_set_serde_uses_centers() {
        let b = BandSet::new(80.0, 2500.0).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"low_center":80.0,"high_center":2500.0}"#);
        assert_eq!(serde_json::from_str::<BandSet>(&json).unwrap(), b);
        assert!(
            serde_json::from_str::<BandSet>(r#"{"low_center":81,"high_center":2500}"#).is_err()
        );
    }

    #[test]
    fn crossover_partitions_unity() {
        // 50 and 63 Hz bands meet within 0.02 %; gains sum to ~1 across the join.
        let (_, hi50) = band_edges(50.0);
        let (lo63, hi63) = band_edges(63.0);
        let (lo50, _) = band_edges(50.0);
        for i in -20..=20 {
            let f = hi50 * 2f64.powf(i as f64 / 480.0);
            let sum = band_gain(f, lo50, hi50) + band_gain(f, lo63, hi63);
            assert!((sum - 1.0).abs() < 0.01, "f={f} sum={sum}");
        }
        assert_eq!(band_gain(1000.0, lo50, hi50), 0.0);
        assert_eq!(band_gain(56.0 * 0.9, lo63, hi63), 0.0);
    }

    #[test]
    fn sine_energy_lands_in_its_band() {
        let fs = 44_100;
        let n = 3 * fs as usize;
        let pcm: Vec<f64> = (0..n)
            .map(|i| 0.5 * (2.0 * PI * 1000.0 * i as f64 / fs as f64).sin())
            .collect();
        let s = AudioSample::new(pcm, fs, 0, "").unwrap();
        let b = BandSet::new(50.0, 4000.0).unwrap();
        let comps = split_bands(&s, &b).unwrap();
        let energy: Vec<f64> = comps
            .components
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum())
            .collect();
        let total: f64 = energy.iter().sum();
        let idx = b.centers().iter().position(|&c| c == 1000.0).unwrap();
        assert!(energy[idx] / total >= 0.95, "{}", energy[idx] / total);
    }

    #[test]
    fn zeros_split_to_zeros() {
        let s = AudioSample::new(vec![0.0; 4410], 44_100, 0, "").unwrap();
        let comps = split_bands(&s, &BandSet::new(50.0, 4000.0).unwrap()).unwrap();
        assert_eq!(comps.components.len(), 20);
        assert!(comps.components.iter().flatten().all(|&v| v == 0.0));
        assert!(comps.components.iter().all(|c| c.len() == 4410));
    }

    #[test]
    fn nyquist_precondition() {
        let s = AudioSample::new(vec![0.0; 800], 8_000, 0, "").unwrap();
        let b = BandSet::new(50.0, 4000.0).unwrap();
        assert!(matches!(split_bands(&s, &b), Err(Error::FsTooLow { .. })));
        assert!(split_bands(&s, &BandSet::new(50.0, 2500.0).unwrap()).is_ok());
    }
}
