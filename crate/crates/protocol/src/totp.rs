//! Time-based fallback codes: HMAC-SHA1 over the 30 s step counter,
//! dynamically truncated to six digits.

use hmac::{Hmac, Mac};
use sha1::Sha1;

pub const STEP_MS: i64 = 30_000;
pub const DIGITS: u32 = 6;
pub const SECRET_LEN: usize = 20;

fn hotp(secret: &[u8], counter: u64, digits: u32) -> u32 {
    let mut mac = Hmac::<Sha1>::new_from_slice(secret).expect("HMAC accepts any key length");
    mac.update(&counter.to_be_bytes());
    let h = mac.finalize().into_bytes();
    let off = (h[19] & 0x0f) as usize;
    let bin = u32::from_be_bytes([h[off] & 0x7f, h[off + 1], h[off + 2], h[off + 3]]);
    bin % 10u32.pow(digits)
}

fn step(now_ms: i64) -> u64 {
    now_ms.div_euclid(STEP_MS).max(0) as u64
}

/// Six-digit code for the step containing `now_ms`.
pub fn code_at(secret: &[u8], now_ms: i64) -> String {
    format!("{:06}", hotp(secret, step(now_ms), DIGITS))
}

/// Accepts the code of the current step or either neighbour.
pub fn verify(secret: &[u8], code: &str, now_ms: i64) -> bool {
    if code.len() != DIGITS as usize || !code.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let s = step(now_ms);
    [s.wrapping_sub(1), s, s + 1]
        .into_iter()
        .filter(|&c| c != u64::MAX)
        .any(|c| format!("{:06}", hotp(secret, c, DIGITS)) == code)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RFC_SECRET: &[u8] = b"12345678901234567890";

    #[test]
    fn rfc6238_sha1_vectors() {
        for (t, want) in [
            (59i64, 94287082u32),
            (1111111109, 7081804),
            (1111111111, 14050471),
            (1234567890, 89005924),
            (2000000000, 69279037),
            (20000000000, 65353130),
        ] {
            assert_eq!(hotp(RFC_SECRET, step(t * 1000), 8), want, "t={t}");
        }
        assert_eq!(code_at(RFC_SECRET, 59_000), "287082");
    }

    #[test]
    fn window_is_one_step_each_way() {
        let now = 1_700_000_000_000;
        for delta in [-1, 0, 1] {
            let code = code_at(RFC_SECRET, now + delta * STEP_MS);
            assert!(verify(RFC_SECRET, &code, now), "delta {delta}");
        }
        let stale = code_at(RFC_SECRET, now - 2 * STEP_MS);
        let current = code_at(RFC_SECRET, now);
        let neighbours = [-1, 1].map(|d| code_at(RFC_SECRET, now + d * STEP_MS));
        if stale != current && !neighbours.contains(&stale) {
            assert!(!verify(RFC_SECRET, &stale, now));
        }
    }

    #[test]
    fn malformed_codes() {
        assert!(!verify(RFC_SECRET, "12345", 0));
        assert!(!verify(RFC_SECRET, "12345a", 0));
        assert!(!verify(RFC_SECRET, "1234567", 0));
    }

    #[test]
    fn random_guess_acceptance_rate() {
        // At a fixed time exactly the window's distinct codes pass, out of 10^6.
        let now = 1_700_000_000_000;
        let accepted = (0..1_000_000u32)
            .filter(|c| verify(RFC_SECRET, &format!("{c:06}"), now))
            .count();
        assert!(accepted <= 3, "{accepted}");
        assert!(accepted >= 1);
    }
}
