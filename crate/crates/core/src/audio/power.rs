use super::AudioSample;

/// Calibration offset added to full-scale mean-square dB. 96 dB is roughly the
/// dynamic range of 16-bit PCM, so digital silence sits near 0 dB.
pub const DEFAULT_REFERENCE_DB: f64 = 96.0;

/// Average power in dB using [`DEFAULT_REFERENCE_DB`].
pub fn average_power_db(s: &AudioSample) -> f64 {
    average_power_db_with_reference(s, DEFAULT_REFERENCE_DB)
}

/// `10·log10(mean(x²)) + reference_db`. Silent or empty input yields
/// `f64::NEG_INFINITY`, which compares below every threshold.
pub fn average_power_db_with_reference(s: &AudioSample, reference_db: f64) -> f64 {
    if s.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mean_square = s.pcm().iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
    if mean_square == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * mean_square.log10() + reference_db
    }
}
