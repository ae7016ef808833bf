//! Functional maximal correlation analysis (FMCA) for non-stationary
//! time-series classification.
//!
//! The crate learns the leading eigenspace of the cross density ratio
//! between paired signals by training two small networks against a
//! log-determinant objective, turns the eigenfunction projections into
//! multiscale power features, and classifies them with a single-hidden-layer
//! perceptron.
//!
//! Module map:
//! - [`linalg`] — dense symmetric/general matrix kernels (Cholesky log-det,
//!   inverse square root, SVD, symmetric eigendecomposition)
//! - [`signal`] — audio ingestion, normalization, endpoint trimming, framing,
//!   magnitude spectra
//! - [`neural`] — fully connected networks with layer normalization, exact
//!   reverse-mode gradients, and Adam
//! - [`fmca`] — correlation estimation, the log-det cost and its gradient,
//!   twin-network training, and the whitening/rotation projection head
//! - [`features`] — multiscale power features from projection traces
//! - [`classify`] — perceptron classifier, stratified folds, cross-validation,
//!   hyperparameter sweeps
//! - [`oracle`] — brute-force cross-density-ratio spectra for discrete joints
//!   and discretized bivariate Gaussians
//! - [`config`] — pipeline configuration and validation
//! - [`dataset`] — corpus loading, frame caches, model containers
//! - [`synth`] — deterministic synthetic corpora for demos and tests

pub mod classify;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod fmca;
pub mod linalg;
pub mod neural;
pub mod oracle;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
