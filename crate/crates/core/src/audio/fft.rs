use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) type C64 = Complex<f64>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

pub(crate) fn forward(buf: &mut [C64]) {
    if !buf.is_empty() {
        plan(buf.len(), false).process(buf);
    }
}

/// Unnormalized inverse transform; callers divide by the length.
pub(crate) fn inverse(buf: &mut [C64]) {
    if !buf.is_empty() {
        plan(buf.len(), true).process(buf);
    }
}

/// Smallest 7-smooth length `>= n`, which rustfft handles efficiently.
pub(crate) fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Transforms two real signals with one complex FFT of length `len`
/// (zero-padded), returning their individual spectra.
pub(crate) fn real_pair_spectra(a: &[f64], b: &[f64], len: usize) -> (Vec<C64>, Vec<C64>) {
    let mut z = vec![C64::new(0.0, 0.0); len];
    for (slot, &v) in z.iter_mut().zip(a) {
        slot.re = v;
    }
    for (slot, &v) in z.iter_mut().zip(b) {
        slot.im = v;
    }
    forward(&mut z);
    let mut sa = vec![C64::new(0.0, 0.0); len];
    let mut sb = vec![C64::new(0.0, 0.0); len];
    for k in 0..len {
        let zk = z[k];
        let zc = z[(len - k) % len].conj();
        sa[k] = (zk + zc) * 0.5;
        // (zk - zc) / 2i
        let d = (zk - zc) * 0.5;
        sb[k] = C64::new(d.im, -d.re);
    }
    (sa, sb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_len_is_smooth() {
        assert_eq!(fast_len(1), 1);
        assert_eq!(fast_len(11), 12);
        assert_eq!(fast_len(132_300), 132_300);
        assert_eq!(fast_len(264_599), 264_600);
    }

    #[test]
    fn packed_spectra_match_separate() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 1.3).cos() - 0.2).collect();
        let (sa, sb) = real_pair_spectra(&a, &b, 40);
        for (sig, spec) in [(&a, &sa), (&b, &sb)] {
            let mut buf = vec![C64::new(0.0, 0.0); 40];
            for (s, &v) in buf.iter_mut().zip(sig.iter()) {
                s.re = v;
            }
            forward(&mut buf);
            for (x, y) in buf.iter().zip(spec) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
