//! Crate-wide error type.
//!
//! Variants are grouped by failure class: configuration problems, data
//! problems (bad or unusable inputs, recoverable per utterance), and
//! numerical failures (degenerate matrices, divergence). The CLI maps these
//! classes onto process exit codes.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix expected to be positive definite had a pivot or eigenvalue at
    /// or below the tolerance. Usually means the regularization epsilon is
    /// too small for the realized network outputs.
    #[error("{context}: matrix not positive definite (smallest pivot/eigenvalue {value:.3e})")]
    NotPositiveDefinite { context: &'static str, value: f64 },

    /// An iterative kernel failed to converge within its iteration budget.
    #[error("{op} did not converge after {iterations} iterations")]
    ConvergenceFailure { op: &'static str, iterations: usize },

    /// All samples are exactly zero; the utterance cannot be normalized.
    #[error("utterance {utterance}: signal is silent (all samples zero)")]
    SilentSignal { utterance: String },

    /// No analysis window exceeded the endpoint-detection threshold.
    #[error("utterance {utterance}: no window exceeds the energy threshold")]
    AllSilent { utterance: String },

    /// The trimmed signal is shorter than one frame.
    #[error("utterance {utterance}: {len} samples < frame length {frame_len}")]
    SignalTooShort {
        utterance: String,
        len: usize,
        frame_len: usize,
    },

    /// Spectral framing requires an even frame length.
    #[error("frame length {frame_len} is odd; spectral frames need an even length")]
    OddFrameLength { frame_len: usize },

    /// An input dimension did not match what the receiver expects.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A gradient contained NaN or infinity; training aborted.
    #[error("non-finite gradient at iteration {iteration}; training aborted")]
    NonFiniteGradient { iteration: usize },

    /// A class cannot supply same-class pairs from distinct utterances.
    #[error("class {label} has {utterances} utterance(s); pair sampling needs at least 2")]
    DegenerateClass { label: u32, utterances: usize },

    /// A projection trace has fewer frames than requested intervals.
    #[error("trace of {frames} frame(s) cannot be split into {intervals} interval(s)")]
    TraceTooShort { frames: usize, intervals: usize },

    /// Feature matrices in one training set disagree on K x T shape.
    #[error("inconsistent feature shape: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    InconsistentFeatureShape {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    /// The dataset cannot satisfy the requested stratification.
    #[error("insufficient data: {reason}")]
    InsufficientData { reason: String },

    /// A probability mass function failed validation.
    #[error("invalid pmf: {reason}")]
    InvalidPmf { reason: String },

    /// Correlation coefficient outside (-1, 1).
    #[error("invalid correlation coefficient {rho}; must lie strictly inside (-1, 1)")]
    InvalidRho { rho: f64 },

    /// More spectrum entries requested than the model or oracle holds.
    #[error("requested top {requested} spectrum entries but only {available} available")]
    DimensionMismatch { requested: usize, available: usize },

    /// A dataset directory yielded no usable recordings.
    #[error("no valid audio files found under {dir}")]
    NoValidFiles { dir: PathBuf },

    /// A configuration key violated its invariant.
    #[error("config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    /// A WAV file could not be used (format, channels, bit depth).
    #[error("{path}: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    /// A cache or model container failed to parse.
    #[error("bad container format: {reason}")]
    BadContainer { reason: String },

    /// The Gaussian oracle's grid-refinement self-consistency gate failed.
    #[error("oracle grid not converged: top values moved by {delta:.3e} under refinement")]
    GridNotConverged { delta: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failure class used by the CLI for exit codes: `1` config/usage,
    /// `2` data, `3` numerical.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidConfig { .. } => 1,
            SilentSignal { .. } | AllSilent { .. } | SignalTooShort { .. }
            | OddFrameLength { .. } | DegenerateClass { .. } | TraceTooShort { .. }
            | InconsistentFeatureShape { .. } | InsufficientData { .. } | InvalidPmf { .. }
            | InvalidRho { .. } | DimensionMismatch { .. } | NoValidFiles { .. }
            | UnsupportedAudio { .. } | BadContainer { .. } | ShapeMismatch { .. } | Io(_) => 2,
            NotPositiveDefinite { .. } | ConvergenceFailure { .. } | NonFiniteGradient { .. }
            | GridNotConverged { .. } => 3,
        }
    }
}
