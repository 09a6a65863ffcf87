use std::f64::consts::PI;

use super::AudioSample;

const TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;

/// Band-limited resampling with a 64-tap Kaiser-windowed sinc (β = 8.6).
///
/// When downsampling, the sinc cutoff is lowered to the target Nyquist rate.
/// Output length is `round(len · target_fs / fs)`, so duration is preserved to
/// within a millisecond.
///
/// # Panics
///
/// Panics if `target_fs` is zero.
pub fn resample(s: &AudioSample, target_fs: u32) -> AudioSample {
    assert!(target_fs > 0, "target sampling rate must be positive");
    if target_fs == s.fs() {
        return s.clone();
    }
    let ratio = s.fs() as f64 / target_fs as f64;
    let out_len = (s.len() as f64 / ratio).round() as usize;
    let cutoff = (1.0 / ratio).min(1.0);
    let half = (TAPS / 2) as isize;
    let norm = bessel_i0(KAISER_BETA);
    let input = s.pcm();

    let pcm: Vec<f64> = (0..out_len)
        .map(|j| {
            let t = j as f64 * ratio;
            let base = t.floor() as isize;
            let mut acc = 0.0;
            for k in (base - half + 1)..=(base + half) {
                if k < 0 || k as usize >= input.len() {
                    continue;
                }
                let tau = t - k as f64;
                let r = tau / half as f64;
                if r.abs() >= 1.0 {
                    continue;
                }
                let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
                acc += input[k as usize] * cutoff * sinc(cutoff * tau) * window;
            }
            acc.clamp(-1.0, 1.0)
        })
        .collect();

    AudioSample::new(pcm, target_fs, s.captured_at(), s.device_id())
        .expect("clamped resampler output is a valid sample")
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
