//! Video-level severity scoring over pre-extracted frame features.
//!
//! A video is an `N × D` matrix of frame features. The classifier adds a
//! sinusoidal positional encoding, runs a small post-norm transformer
//! encoder, pools frames with attention-MIL (or mean/max), and
//! maps the pooled vector to ordinal severity classes with a dense head.
//!
//! Everything needed around it lives here too: a reverse-mode autodiff
//! tape with finite-difference checking, AdamW, the AFF1 feature format,
//! manifests and stratified folds, a synthetic task generator, the
//! training/cross-validation/ablation harness, agreement statistics and
//! the `severity-seq` command line.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod data;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod train;
