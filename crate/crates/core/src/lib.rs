//! # vigil-core — rodent EEG vigilance-state scoring
//!
//! Classifies 10-second EEG epochs into Wake, SWS, and REM from engineered
//! time- and frequency-domain features. The pipeline is:
//!
//! ```text
//! recording / synthetic generator
//!   │
//!   ├─ dataio     non-overlapping 10 s epochs, labels, stratified splits
//!   ├─ spectral   Welch PSD, band powers, peak frequency, spectral entropy
//!   ├─ features   MMD, Hjorth descriptors, feature vectors, standardization
//!   ├─ gbt        gradient-boosted trees (softmax objective), from scratch
//!   ├─ baselines  multinomial logistic regression, feed-forward network
//!   ├─ eval       confusion/macro metrics, calibration, cross-validated search
//!   └─ explain    split-gain importance, exact TreeSHAP attributions
//! ```
//!
//! Everything is deterministic given a seed: the PRNG is ChaCha (counter
//! based, splittable by derived seeds), and every serialized artifact records
//! the seed and schema it was produced with.

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod gbt;
pub mod spectral;

mod textio;

pub use error::{Error, Result};
