use std::time::{SystemTime, UNIX_EPOCH};

/// The phone's wall clock, optionally skewed from the host's to exercise
/// clock synchronization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LocalClock {
    pub skew_ms: i64,
}

impl LocalClock {
    pub fn skewed(skew_ms: i64) -> Self {
        Self { skew_ms }
    }

    pub fn now_ms(&self) -> i64 {
        let host = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        host + self.skew_ms
    }
}
