//! Signal-processing and decision kernel for ambient-audio second-factor
//! authentication.
//!
//! Two recordings of the surrounding sound, one from the user's phone and one
//! from the computer being used to log in, are compared band by band. Each
//! recording is split into one-third octave components, every pair of
//! components is cross-correlated inside a bounded lag window, and the mean of
//! the per-band peaks is the similarity score. [`decision`] turns that score
//! and the recordings' average power into an accept/reject verdict, and
//! [`timesync`] estimates the clock offsets needed to line the recordings up.

pub mod audio;
pub mod decision;
mod error;
pub mod timesync;

pub use audio::{
    average_power_db, average_power_db_with_reference, band_edges, band_scores, cross_correlation,
    decode_wav, encode_wav, normalized_cross_correlation, normalized_max_xcorr, quantize_i16,
    resample, similarity_score, split_bands, AudioSample, BandComponents, BandSet,
    CorrelationSeries, CANONICAL_FS, DEFAULT_REFERENCE_DB, NOMINAL_CENTERS,
};
pub use decision::{
    decide, default_policy, evaluate, policy_for_weighting, PolicyRecord, Reason, ScoringPolicy,
    Verdict,
};
pub use error::{Error, Result};
pub use timesync::{
    adjust_timestamp, align, estimate_offset, ClockOffset, SyncRound, MIN_OVERLAP_MS,
};
