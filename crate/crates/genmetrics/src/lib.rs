//! Evaluation toolkit for class-conditional generative models.
//!
//! The crate measures how well a conditional generator covers and respects a
//! labeled data distribution, using classifiers as probes alongside
//! distributional distances:
//!
//! - cross-set accuracies: train on generated / test on real and the reverse
//!   ([`ganeval`]), with diversity sweeps and augmentation comparisons
//! - Inception-style score over class posteriors ([`inception`])
//! - Fréchet distance between Gaussian moment summaries ([`frechet`])
//! - multi-scale sliced Wasserstein distance over image patches ([`swd`])
//! - deterministic desk-scale classifiers ([`classifier`])
//! - a synthetic lab of Gaussian mixtures, glyph digits, and controlled
//!   corruptions for falsifying metric behavior ([`synth`])
//! - reproducible reports with input digests ([`report`]) and a CLI ([`cli`])
//!
//! Every stochastic stage draws from counter-derived streams ([`rng`]), so
//! all results are bit-reproducible for a given seed, independent of worker
//! count.

pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod frechet;
pub mod ganeval;
pub mod inception;
pub mod report;
pub mod rng;
pub mod swd;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
