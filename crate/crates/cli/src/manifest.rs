//! Run manifests: enough provenance to reproduce every emitted number.
//!
//! A manifest records the full configuration snapshot, the dataset
//! fingerprint, the seed, the tool version, per-stage wall times, and the
//! paths written. It is written atomically at the end of a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fmca_core::config::PipelineConfig;
use fmca_core::dataset::write_atomic;
use fmca_core::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub outputs: Vec<String>,
    /// Stage name -> wall seconds, insertion-ordered by stage name.
    pub timings: BTreeMap<String, f64>,
    pub config: PipelineConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig, fingerprint: String) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.run.seed,
            dataset_fingerprint: fingerprint,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }
}

/// Stopwatch for manifest timings.
pub struct StageTimer {
    start: Instant,
}

impl StageTimer {
    pub fn start() -> Self {
        StageTimer {
            start: Instant::now(),
        }
    }

    pub fn record(self, manifest: &mut RunManifest, stage: &str) {
        manifest
            .timings
            .insert(stage.to_string(), self.start.elapsed().as_secs_f64());
    }
}

/// Sibling manifest path: `<output>.manifest.toml`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    name.push_str(".manifest.toml");
    output.with_file_name(name)
}
