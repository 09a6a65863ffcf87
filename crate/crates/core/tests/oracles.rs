//! Oracle checks for the correlation and scoring kernel.
//!
//! Every expected value here comes from an independent computation in this
//! file (direct O(n²) sums, Monte-Carlo runs) rather than from the FFT path.

use earshot_core::{
    average_power_db, band_edges, cross_correlation, normalized_max_xcorr, similarity_score,
    AudioSample, BandSet, NOMINAL_CENTERS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn direct_xcorr(x: &[f64], y: &[f64], lag: isize) -> f64 {
    let n = x.len() as isize;
    (0..n)
        .filter_map(|i| {
            let j = i - lag;
            (0..n).contains(&j).then(|| x[i as usize] * y[j as usize])
        })
        .sum()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    let d = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| d.sample(rng).clamp(-1.0, 1.0)).collect()
}

fn sample(pcm: Vec<f64>) -> AudioSample {
    AudioSample::new(pcm, 44_100, 0, "t").unwrap()
}

#[test]
fn fft_correlation_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let n = rng.gen_range(1..=600);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = cross_correlation(&x, &y).unwrap();
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt()
            * y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (lag, v) in fast.iter() {
            let slow = direct_xcorr(&x, &y, lag);
            assert!(
                (v - slow).abs() <= 1e-9 * scale.max(1.0),
                "trial {trial} lag {lag}: {v} vs {slow}"
            );
        }
    }
}

#[test]
fn independent_white_noise_full_band_stays_low() {
    // n = 132300, max_lag = 6615: the peak normalized correlation of
    // independent full-band noise is ~4.5σ with σ = 1/sqrt(n) ≈ 0.0027.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 1000;
    let mut below = 0;
    for _ in 0..trials {
        let x = gaussian(&mut rng, 132_300, 0.1);
        let y = gaussian(&mut rng, 132_300, 0.1);
        if normalized_max_xcorr(&x, &y, 6615).unwrap() < 0.1 {
            below += 1;
        }
    }
    assert!(below as f64 / trials as f64 >= 0.99, "{below}/{trials}");
}

#[test]
fn shift_within_window_keeps_score_high() {
    let b = BandSet::new(50.0, 4000.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = gaussian(&mut rng, 132_300, 0.1);
    for d_ms in [0usize, 25, 60, 100, 150] {
        let d = d_ms * 441 / 10;
        let mut x = base.clone();
        x.extend(std::iter::repeat_n(0.0, d));
        let mut y = vec![0.0; d];
        y.extend_from_slice(&base);
        let s = similarity_score(&sample(x), &sample(y), &b, 150.0).unwrap();
        assert!(s >= 0.99, "delay {d_ms} ms: {s}");
    }
}

#[test]
fn shift_beyond_window_drops_score() {
    let b = BandSet::new(50.0, 4000.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = 300 * 441 / 10;
    let trials = 40;
    let mut low = 0;
    for _ in 0..trials {
        let base = gaussian(&mut rng, 132_300, 0.1);
        let mut x = base.clone();
        x.extend(std::iter::repeat_n(0.0, d));
        let mut y = vec![0.0; d];
        y.extend_from_slice(&base);
        if similarity_score(&sample(x), &sample(y), &b, 150.0).unwrap() < 0.2 {
            low += 1;
        }
    }
    assert!(low as f64 / trials as f64 >= 0.95, "{low}/{trials}");
}

#[test]
fn doubling_amplitude_adds_six_db() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let pcm = gaussian(&mut rng, 2000, 0.1);
        let doubled: Vec<f64> = pcm.iter().map(|v| v * 2.0).collect();
        if doubled.iter().any(|v| v.abs() > 1.0) {
            continue;
        }
        let delta = average_power_db(&sample(doubled)) - average_power_db(&sample(pcm));
        assert!((delta - 6.0206).abs() < 0.001, "{delta}");
    }
}

#[test]
fn band_edge_ratio_is_third_octave() {
    let third = 2f64.powf(1.0 / 3.0);
    for c in NOMINAL_CENTERS {
        let (lo, hi) = band_edges(c);
        assert!(((hi / lo) - third).abs() / third < 1e-12);
    }
}

fn signal_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    (any::<u64>(), 0.01f64..0.5).prop_map(move |(seed, sd)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gaussian(&mut rng, len, sd)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn score_invariants(
        x in signal_strategy(4410),
        y in signal_strategy(4410),
        alpha in prop_oneof![-4.0f64..-0.01, 0.01f64..4.0],
    ) {
        let b = BandSet::new(50.0, 4000.0).unwrap();
        let xs = sample(x.clone());
        let ys = sample(y.clone());
        let s_xy = similarity_score(&xs, &ys, &b, 150.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&s_xy));

        let s_yx = similarity_score(&ys, &xs, &b, 150.0).unwrap();
        prop_assert!((s_xy - s_yx).abs() <= 1e-9, "symmetry {} {}", s_xy, s_yx);

        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let alpha = alpha.clamp(-1.0 / peak, 1.0 / peak);
        let scaled = sample(y.iter().map(|v| (v * alpha).clamp(-1.0, 1.0)).collect());
        let s_scaled = similarity_score(&xs, &scaled, &b, 150.0).unwrap();
        prop_assert!((s_xy - s_scaled).abs() <= 1e-9, "scale {} {}", s_xy, s_scaled);

        let s_xx = similarity_score(&xs, &xs, &b, 150.0).unwrap();
        prop_assert!((s_xx - 1.0).abs() <= 1e-9, "self {}", s_xx);
    }

    #[test]
    fn lag_window_is_monotone(
        x in signal_strategy(512),
        y in signal_strategy(512),
        a in 0usize..600,
        b in 0usize..600,
    ) {
        let (lo, hi) = (a.min(b), a.max(b));
        let small = normalized_max_xcorr(&x, &y, lo).unwrap();
        let large = normalized_max_xcorr(&x, &y, hi).unwrap();
        prop_assert!(large >= small - 1e-12);
        prop_assert!((0.0..=1.0).contains(&small));
    }
}
