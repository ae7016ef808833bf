//! Pipeline configuration: one struct per stage, TOML-sectioned on disk,
//! with defaults matching the reference operating point (H1 = 200, n1 = 3,
//! lr1 = 0.001, eps = 1e-4, I = 7000, K = 8, T = 6, H2 = 40, lr2 = 0.001,
//! L = 50, S = 1, spectral input).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Activation, OutputHead};
use crate::signal::Domain;

/// Default filename pattern: `<digit>_<speaker>_<index>.wav`.
pub const DEFAULT_FILENAME_PATTERN: &str = r"^(?P<label>\d+)_(?P<speaker>[^_]+)_(?P<index>\d+)$";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalConfig {
    /// Frame length L in samples.
    pub frame_len: usize,
    /// Frame stride S in samples.
    pub stride: usize,
    /// Input representation fed to the networks.
    pub domain: Domain,
    /// Endpoint detector amplitude threshold (ratio of full scale).
    pub trim_threshold: f64,
    /// Endpoint detector analysis window in samples.
    pub trim_window: usize,
    /// Regex with named captures `label` (required) and `speaker` (optional)
    /// applied to file stems.
    pub filename_pattern: String,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            frame_len: 50,
            stride: 1,
            domain: Domain::Spectral,
            trim_threshold: 0.02,
            trim_window: 128,
            filename_pattern: DEFAULT_FILENAME_PATTERN.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FmcaConfig {
    /// Projection space dimension K.
    pub projection_dim: usize,
    /// Hidden width H1 of both projector networks.
    pub hidden_width: usize,
    /// Hidden layer count n1.
    pub hidden_count: usize,
    /// Adam learning rate lr1.
    pub learning_rate: f64,
    /// Correlation regularization epsilon.
    pub epsilon: f64,
    /// Training iterations I.
    pub iterations: usize,
    /// Frame pairs per iteration.
    pub batch_size: usize,
    pub activation: Activation,
    /// Output nonlinearity of the projector networks.
    pub head: OutputHead,
}

impl Default for FmcaConfig {
    fn default() -> Self {
        FmcaConfig {
            projection_dim: 8,
            hidden_width: 200,
            hidden_count: 3,
            learning_rate: 0.001,
            epsilon: 1e-4,
            iterations: 7000,
            batch_size: 512,
            activation: Activation::Tanh,
            head: OutputHead::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Temporal intervals T per utterance.
    pub intervals: usize,
    /// Z-score features from training-split statistics before the classifier.
    pub standardize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            intervals: 6,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Hidden width H2.
    pub hidden_width: usize,
    /// Adam learning rate lr2.
    pub learning_rate: f64,
    /// Maximum training epochs.
    pub epochs: usize,
    /// Early-stop patience on the training cross-entropy plateau.
    pub patience: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden_width: 40,
            learning_rate: 0.001,
            epochs: 300,
            patience: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seed for every random choice in the run.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 0 }
    }
}

/// Full pipeline configuration, sectioned per stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub signal: SignalConfig,
    pub fmca: FmcaConfig,
    pub features: FeatureConfig,
    pub classifier: ClassifierConfig,
    pub run: RunConfig,
}

impl PipelineConfig {
    /// Network input width implied by the frame settings.
    pub fn input_dim(&self) -> usize {
        match self.signal.domain {
            Domain::Temporal => self.signal.frame_len,
            Domain::Spectral => self.signal.frame_len / 2,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig {
            key: "<file>".into(),
            reason: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| -> Result<()> {
            Err(Error::InvalidConfig {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.signal.frame_len < 2 {
            return bad("signal.frame_len", "must be at least 2 samples");
        }
        if self.signal.stride < 1 {
            return bad("signal.stride", "must be at least 1 sample");
        }
        if self.signal.domain == Domain::Spectral && self.signal.frame_len % 2 != 0 {
            return bad("signal.frame_len", "must be even for spectral input");
        }
        if !(self.signal.trim_threshold > 0.0 && self.signal.trim_threshold < 1.0) {
            return bad("signal.trim_threshold", "must lie strictly in (0, 1)");
        }
        if self.signal.trim_window < 1 {
            return bad("signal.trim_window", "must be at least 1 sample");
        }
        if regex::Regex::new(&self.signal.filename_pattern).is_err() {
            return bad("signal.filename_pattern", "is not a valid regex");
        }
        if !self.signal.filename_pattern.contains("?P<label>") {
            return bad(
                "signal.filename_pattern",
                "must contain a named capture group `label`",
            );
        }
        if self.fmca.projection_dim < 1 {
            return bad("fmca.projection_dim", "must be at least 1");
        }
        if self.fmca.hidden_count > 0 && self.fmca.hidden_width < 1 {
            return bad("fmca.hidden_width", "must be at least 1 with hidden layers");
        }
        if !(self.fmca.learning_rate > 0.0 && self.fmca.learning_rate.is_finite()) {
            return bad("fmca.learning_rate", "must be positive and finite");
        }
        if !(self.fmca.epsilon >= 0.0 && self.fmca.epsilon.is_finite()) {
            return bad("fmca.epsilon", "must be non-negative and finite");
        }
        if self.fmca.batch_size < 1 {
            return bad("fmca.batch_size", "must be at least 1");
        }
        if self.features.intervals < 1 {
            return bad("features.intervals", "must be at least 1");
        }
        if self.classifier.hidden_width < 1 {
            return bad("classifier.hidden_width", "must be at least 1");
        }
        if !(self.classifier.learning_rate > 0.0 && self.classifier.learning_rate.is_finite()) {
            return bad("classifier.learning_rate", "must be positive and finite");
        }
        if self.classifier.epochs < 1 {
            return bad("classifier.epochs", "must be at least 1");
        }
        if self.classifier.patience < 1 {
            return bad("classifier.patience", "must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_operating_point() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.fmca.hidden_width, 200);
        assert_eq!(cfg.fmca.hidden_count, 3);
        assert_eq!(cfg.fmca.learning_rate, 0.001);
        assert_eq!(cfg.fmca.epsilon, 1e-4);
        assert_eq!(cfg.fmca.iterations, 7000);
        assert_eq!(cfg.fmca.projection_dim, 8);
        assert_eq!(cfg.features.intervals, 6);
        assert_eq!(cfg.classifier.hidden_width, 40);
        assert_eq!(cfg.classifier.learning_rate, 0.001);
        assert_eq!(cfg.signal.frame_len, 50);
        assert_eq!(cfg.signal.stride, 1);
        assert_eq!(cfg.signal.domain, Domain::Spectral);
        assert_eq!(cfg.input_dim(), 25);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let mut cfg = PipelineConfig::default();
        cfg.fmca.projection_dim = 12;
        cfg.run.seed = 99;
        let text = cfg.to_toml_string();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_files_fall_back_to_defaults() {
        let cfg = PipelineConfig::from_toml_str("[fmca]\nprojection_dim = 4\n").unwrap();
        assert_eq!(cfg.fmca.projection_dim, 4);
        assert_eq!(cfg.fmca.hidden_width, 200);
    }

    #[test]
    fn validation_names_the_offending_key() {
        let mut cfg = PipelineConfig::default();
        cfg.signal.frame_len = 51; // odd + spectral
        match cfg.validate() {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "signal.frame_len"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }

        let mut cfg = PipelineConfig::default();
        cfg.fmca.learning_rate = -1.0;
        match cfg.validate() {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "fmca.learning_rate"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }

        let mut cfg = PipelineConfig::default();
        cfg.fmca.epsilon = -1e-9;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.signal.filename_pattern = "(".into();
        assert!(cfg.validate().is_err());
    }
}
