//! Evaluation harness: false rejection and false acceptance rates by
//! setting, threshold sweeps with the equal error rate, band-set search,
//! same-media attack simulation and seeded synthetic corpora.
//!
//! Every run is deterministic for a fixed seed. Pairs are scored in parallel
//! and reduced in manifest order.

mod error;
pub mod manifest;
pub mod optimize;
pub mod rates;
pub mod report;
pub mod same_media;
pub mod score;
pub mod synth;

pub use error::{EvalError, Result};
pub use manifest::{GroupBy, Manifest, ManifestEntry, Pairing, Vocabulary};
pub use optimize::{optimize_bands, optimize_scored, search_space, Optimum};
pub use rates::{
    compute_far, compute_frr, equal_error, sweep, sweep_eer, tau_grid, CurvePoint, Eer, GroupRate,
    Metric, RateReport,
};
pub use report::{write_curve_csv, write_rates_csv};
pub use same_media::{
    simulate_same_media, synthetic_broadcast, DelayDistribution, SameMediaConfig,
};
pub use score::{PairScore, Scorer};
pub use synth::{synth_generate, PairKind, SynthSpec};
