//! Command-line surface of the pipeline: preprocessing, training,
//! projection/feature export, cross-validated evaluation, hyperparameter
//! sweeps, oracle recovery checks, and model inspection.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

mod checks;
mod manifest;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fmca_core::classify::{cross_validate, export_sweep_csv, sweep, SweepParam};
use fmca_core::config::PipelineConfig;
use fmca_core::dataset::{
    self, fingerprint_dir, load_corpus, preprocess_signals, read_frame_cache, read_signal_cache,
};
use fmca_core::error::{Error, Result};
use fmca_core::features::{export_features_csv, extract_features};
use fmca_core::fmca::{export_trace_csv, trace_csv_header, train_fmca, FmcaModel};
use fmca_core::neural::{Activation, OutputHead};
use fmca_core::signal::Domain;
use fmca_core::synth;
use manifest::{manifest_path, RunManifest, StageTimer};

#[derive(Parser, Debug)]
#[command(
    name = "fmca",
    version,
    about = "Maximal-correlation eigenspace features for time-series classification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Preprocess a WAV directory into a frame cache.
    Preprocess {
        /// Directory of labeled WAV files.
        #[arg(long)]
        data: PathBuf,
        /// Cache directory to create or overwrite.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train the projector networks on a frame cache.
    Train {
        #[arg(long)]
        cache: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Cost trajectory CSV (default: `<out>.trajectory.csv`).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Project cached utterances through a trained model.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        /// Trace CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export power features for cached utterances.
    Features {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        /// Feature CSV output.
        #[arg(long)]
        out: PathBuf,
        /// Override the temporal interval count from the model snapshot.
        #[arg(long)]
        intervals: Option<usize>,
    },
    /// Cross-validated end-to-end accuracy on a frame cache.
    Evaluate {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Per-fold CSV output (default: print only).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Sweep one hyperparameter (L, S, K, or T) over a value list.
    Sweep {
        #[arg(long)]
        cache: PathBuf,
        /// L, S, K, or T.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the synthetic oracle recovery suite.
    OracleCheck {
        /// Report CSV output (default: print only).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training iterations per case.
        #[arg(long, default_value_t = 3000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the header, dimensions, spectrum, and config of a model file.
    InspectModel {
        #[arg(long)]
        model: PathBuf,
    },
    /// Generate a deterministic synthetic corpus as WAV files.
    Synth {
        /// `tones`, `chirps`, or `digits`.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Configuration file plus per-key override flags; flags win.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Frame length L in samples.
    #[arg(long)]
    frame_len: Option<usize>,
    /// Frame stride S in samples.
    #[arg(long)]
    stride: Option<usize>,
    /// Input representation: `temporal` or `spectral`.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    trim_threshold: Option<f64>,
    #[arg(long)]
    trim_window: Option<usize>,
    #[arg(long)]
    filename_pattern: Option<String>,

    /// Projection dimension K.
    #[arg(long)]
    projection_dim: Option<usize>,
    /// Hidden width H1.
    #[arg(long)]
    hidden_width: Option<usize>,
    /// Hidden layer count n1.
    #[arg(long)]
    hidden_count: Option<usize>,
    /// Projector learning rate lr1.
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Training iterations I.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hidden activation: `tanh` or `relu`.
    #[arg(long)]
    activation: Option<String>,
    /// Projector output head: `softmax` or `linear`.
    #[arg(long)]
    head: Option<String>,

    /// Temporal interval count T.
    #[arg(long)]
    intervals: Option<usize>,
    /// Z-score features from training statistics.
    #[arg(long)]
    standardize: Option<bool>,

    /// Classifier hidden width H2.
    #[arg(long)]
    classifier_hidden: Option<usize>,
    /// Classifier learning rate lr2.
    #[arg(long)]
    classifier_learning_rate: Option<f64>,
    #[arg(long)]
    classifier_epochs: Option<usize>,
    #[arg(long)]
    classifier_patience: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_toml_str(&fs::read_to_string(path)?)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.frame_len {
            cfg.signal.frame_len = v;
        }
        if let Some(v) = self.stride {
            cfg.signal.stride = v;
        }
        if let Some(v) = &self.domain {
            cfg.signal.domain = match v.as_str() {
                "temporal" => Domain::Temporal,
                "spectral" => Domain::Spectral,
                other => {
                    return Err(Error::InvalidConfig {
                        key: "signal.domain".into(),
                        reason: format!("unknown domain `{other}`"),
                    })
                }
            };
        }
        if let Some(v) = self.trim_threshold {
            cfg.signal.trim_threshold = v;
        }
        if let Some(v) = self.trim_window {
            cfg.signal.trim_window = v;
        }
        if let Some(v) = &self.filename_pattern {
            cfg.signal.filename_pattern = v.clone();
        }
        if let Some(v) = self.projection_dim {
            cfg.fmca.projection_dim = v;
        }
        if let Some(v) = self.hidden_width {
            cfg.fmca.hidden_width = v;
        }
        if let Some(v) = self.hidden_count {
            cfg.fmca.hidden_count = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.fmca.learning_rate = v;
        }
        if let Some(v) = self.epsilon {
            cfg.fmca.epsilon = v;
        }
        if let Some(v) = self.iterations {
            cfg.fmca.iterations = v;
        }
        if let Some(v) = self.batch_size {
            cfg.fmca.batch_size = v;
        }
        if let Some(v) = &self.activation {
            cfg.fmca.activation = match v.as_str() {
                "tanh" => Activation::Tanh,
                "relu" => Activation::Relu,
                other => {
                    return Err(Error::InvalidConfig {
                        key: "fmca.activation".into(),
                        reason: format!("unknown activation `{other}`"),
                    })
                }
            };
        }
        if let Some(v) = &self.head {
            cfg.fmca.head = match v.as_str() {
                "softmax" => OutputHead::Softmax,
                "linear" => OutputHead::Linear,
                other => {
                    return Err(Error::InvalidConfig {
                        key: "fmca.head".into(),
                        reason: format!("unknown head `{other}`"),
                    })
                }
            };
        }
        if let Some(v) = self.intervals {
            cfg.features.intervals = v;
        }
        if let Some(v) = self.standardize {
            cfg.features.standardize = v;
        }
        if let Some(v) = self.classifier_hidden {
            cfg.classifier.hidden_width = v;
        }
        if let Some(v) = self.classifier_learning_rate {
            cfg.classifier.learning_rate = v;
        }
        if let Some(v) = self.classifier_epochs {
            cfg.classifier.epochs = v;
        }
        if let Some(v) = self.classifier_patience {
            cfg.classifier.patience = v;
        }
        if let Some(v) = self.seed {
            cfg.run.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Keys that must agree with an existing cache's framing.
    fn check_framing_consistency(
        &self,
        cache_signal: &fmca_core::config::SignalConfig,
    ) -> Result<()> {
        if let Some(v) = self.frame_len {
            if v != cache_signal.frame_len {
                return Err(Error::InvalidConfig {
                    key: "signal.frame_len".into(),
                    reason: format!(
                        "cache was built with frame_len {}; re-run preprocess to change it",
                        cache_signal.frame_len
                    ),
                });
            }
        }
        if let Some(v) = self.stride {
            if v != cache_signal.stride {
                return Err(Error::InvalidConfig {
                    key: "signal.stride".into(),
                    reason: format!(
                        "cache was built with stride {}; re-run preprocess to change it",
                        cache_signal.stride
                    ),
                });
            }
        }
        if let Some(v) = &self.domain {
            let want = format!("{}", cache_signal.domain);
            if v != &want {
                return Err(Error::InvalidConfig {
                    key: "signal.domain".into(),
                    reason: format!(
                        "cache was built with domain {want}; re-run preprocess to change it"
                    ),
                });
            }
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Preprocess { data, out, cfg } => cmd_preprocess(&data, &out, &cfg),
        Cmd::Train {
            cache,
            out,
            trajectory,
            cfg,
        } => cmd_train(&cache, &out, trajectory.as_deref(), &cfg),
        Cmd::Project { model, cache, out } => cmd_project(&model, &cache, &out),
        Cmd::Features {
            model,
            cache,
            out,
            intervals,
        } => cmd_features(&model, &cache, &out, intervals),
        Cmd::Evaluate {
            cache,
            folds,
            out,
            cfg,
        } => cmd_evaluate(&cache, folds, out.as_deref(), &cfg),
        Cmd::Sweep {
            cache,
            param,
            values,
            folds,
            out,
            cfg,
        } => cmd_sweep(&cache, &param, &values, folds, &out, &cfg),
        Cmd::OracleCheck {
            out,
            iterations,
            seed,
        } => cmd_oracle_check(out.as_deref(), iterations, seed),
        Cmd::InspectModel { model } => cmd_inspect_model(&model),
        Cmd::Synth {
            kind,
            out,
            per_class,
            seed,
        } => cmd_synth(&kind, &out, per_class, seed),
    }
}

/// Buffered writer through a temp file; call [`finish_atomic`] to rename
/// into place.
fn atomic_writer(path: &Path) -> Result<(PathBuf, BufWriter<fs::File>)> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    Ok((tmp.clone(), BufWriter::new(fs::File::create(tmp)?)))
}

fn finish_atomic(tmp: PathBuf, mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush()?;
    drop(w);
    fs::rename(tmp, path)?;
    Ok(())
}

fn cmd_preprocess(data: &Path, out: &Path, cfg_args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = cfg_args.resolve()?;
    let mut manifest = RunManifest::new("preprocess", &cfg, fingerprint_dir(data)?);

    let timer = StageTimer::start();
    let (signals, mut skipped) = load_corpus(data, &cfg.signal)?;
    let outcome = {
        let mut o = preprocess_signals(signals, &cfg.signal)?;
        skipped.append(&mut o.skipped);
        o.skipped = skipped;
        o
    };
    timer.record(&mut manifest, "preprocess");
    if outcome.dataset.is_empty() {
        return Err(Error::NoValidFiles {
            dir: data.to_path_buf(),
        });
    }

    let timer = StageTimer::start();
    dataset::write_cache(out, &outcome, &cfg.signal, &manifest.dataset_fingerprint)?;
    timer.record(&mut manifest, "write_cache");
    manifest.add_output(out);
    manifest.write(&out.join("run.manifest.toml"))?;

    println!(
        "cached {} utterance(s) ({} frames, width {}); skipped {} (see skipped.tsv)",
        outcome.dataset.len(),
        outcome.dataset.total_frames(),
        outcome.dataset.width(),
        outcome.skipped.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(
    cache: &Path,
    out: &Path,
    trajectory: Option<&Path>,
    cfg_args: &ConfigArgs,
) -> Result<ExitCode> {
    let (dataset, meta) = read_frame_cache(cache)?;
    cfg_args.check_framing_consistency(&meta.signal)?;
    let mut cfg = cfg_args.resolve()?;
    cfg.signal = meta.signal.clone();
    let mut manifest = RunManifest::new("train", &cfg, meta.source_fingerprint.clone());

    let timer = StageTimer::start();
    let training = train_fmca(&dataset, &dataset.all_indices(), &cfg)?;
    timer.record(&mut manifest, "train");

    let trajectory_path = trajectory
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("trajectory.csv"));
    let (tmp, mut w) = atomic_writer(&trajectory_path)?;
    writeln!(w, "iter,cost")?;
    for (iter, cost) in &training.trajectory {
        writeln!(w, "{iter},{cost}")?;
    }
    finish_atomic(tmp, w, &trajectory_path)?;
    manifest.add_output(&trajectory_path);

    if let Some(iteration) = training.diverged_at {
        let checkpoint = out.with_extension("checkpoint.fmca");
        training.model.save(&checkpoint)?;
        manifest.add_output(&checkpoint);
        manifest.write(&manifest_path(out))?;
        eprintln!(
            "training diverged at iteration {iteration}; last-good checkpoint written to {}",
            checkpoint.display()
        );
        return Err(Error::NonFiniteGradient { iteration });
    }

    training.model.save(out)?;
    manifest.add_output(out);
    manifest.write(&manifest_path(out))?;

    let first = training.trajectory.first().map(|p| p.1).unwrap_or(f64::NAN);
    let last = training.trajectory.last().map(|p| p.1).unwrap_or(f64::NAN);
    println!(
        "trained {} iterations on {} utterances; cost {first:.6} -> {last:.6}",
        cfg.fmca.iterations,
        dataset.len()
    );
    println!(
        "spectrum: {}",
        training
            .model
            .head
            .sigma
            .iter()
            .map(|s| format!("{s:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("model written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_project(model_path: &Path, cache: &Path, out: &Path) -> Result<ExitCode> {
    let model = FmcaModel::load(model_path)?;
    let (dataset, _) = read_frame_cache(cache)?;
    let (tmp, mut w) = atomic_writer(out)?;
    writeln!(w, "{}", trace_csv_header(model.head.dim()))?;
    let mut rows = 0usize;
    for (meta, batch) in dataset.utterances.iter().zip(&dataset.batches) {
        let trace = model.project(batch)?;
        rows += trace.nrows();
        export_trace_csv(&mut w, &meta.id, &trace)?;
    }
    finish_atomic(tmp, w, out)?;
    println!(
        "projected {} utterance(s), {rows} frame row(s) -> {}",
        dataset.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_features(
    model_path: &Path,
    cache: &Path,
    out: &Path,
    intervals: Option<usize>,
) -> Result<ExitCode> {
    let model = FmcaModel::load(model_path)?;
    let (dataset, _) = read_frame_cache(cache)?;
    let intervals = intervals.unwrap_or(model.config.features.intervals);
    let mut features = Vec::with_capacity(dataset.len());
    let mut skipped = 0usize;
    for (meta, batch) in dataset.utterances.iter().zip(&dataset.batches) {
        let trace = model.project(batch)?;
        match extract_features(&trace.view(), intervals, &meta.id, meta.label) {
            Ok(fm) => features.push(fm),
            Err(Error::TraceTooShort { .. }) => {
                log::warn!(
                    "skipping {}: trace shorter than {intervals} intervals",
                    meta.id
                );
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let (tmp, mut w) = atomic_writer(out)?;
    export_features_csv(&mut w, &features)?;
    finish_atomic(tmp, w, out)?;
    println!(
        "extracted {} feature matrix(es) (skipped {skipped}) -> {}",
        features.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(
    cache: &Path,
    folds: usize,
    out: Option<&Path>,
    cfg_args: &ConfigArgs,
) -> Result<ExitCode> {
    let (dataset, meta) = read_frame_cache(cache)?;
    cfg_args.check_framing_consistency(&meta.signal)?;
    let mut cfg = cfg_args.resolve()?;
    cfg.signal = meta.signal.clone();
    let mut manifest = RunManifest::new("evaluate", &cfg, meta.source_fingerprint.clone());

    let timer = StageTimer::start();
    let report = cross_validate(&dataset, &cfg, folds)?;
    timer.record(&mut manifest, "evaluate");

    for fr in &report.folds {
        println!(
            "fold {}: accuracy {:.4} ({} scored)",
            fr.fold, fr.accuracy, fr.test_scored
        );
    }
    println!(
        "mean accuracy {:.4} +/- {:.4} over {folds} folds",
        report.mean, report.std
    );

    if let Some(out) = out {
        let (tmp, mut w) = atomic_writer(out)?;
        writeln!(w, "fold,accuracy")?;
        for fr in &report.folds {
            writeln!(w, "{},{}", fr.fold, fr.accuracy)?;
        }
        writeln!(w, "mean,{}", report.mean)?;
        writeln!(w, "std,{}", report.std)?;
        finish_atomic(tmp, w, out)?;
        manifest.add_output(out);
        manifest.write(&manifest_path(out))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    cache: &Path,
    param: &str,
    values: &[usize],
    folds: usize,
    out: &Path,
    cfg_args: &ConfigArgs,
) -> Result<ExitCode> {
    let param: SweepParam = param.parse()?;
    let (corpus, meta) = read_signal_cache(cache)?;
    let mut cfg = cfg_args.resolve()?;
    // Base framing comes from the cache; explicit flags or swept values
    // override it per run.
    let explicit_frame_len = cfg_args.frame_len;
    let explicit_stride = cfg_args.stride;
    let explicit_domain = cfg_args.domain.is_some();
    if explicit_frame_len.is_none() {
        cfg.signal.frame_len = meta.signal.frame_len;
    }
    if explicit_stride.is_none() {
        cfg.signal.stride = meta.signal.stride;
    }
    if !explicit_domain {
        cfg.signal.domain = meta.signal.domain;
    }
    let mut manifest = RunManifest::new("sweep", &cfg, meta.source_fingerprint.clone());

    let timer = StageTimer::start();
    let report = sweep(&corpus, &cfg, param, values, folds)?;
    timer.record(&mut manifest, "sweep");

    for point in &report.points {
        println!(
            "{param}={}: mean accuracy {:.4} +/- {:.4}",
            point.value, point.report.mean, point.report.std
        );
    }
    let (tmp, mut w) = atomic_writer(out)?;
    export_sweep_csv(&mut w, &report)?;
    finish_atomic(tmp, w, out)?;
    manifest.add_output(out);
    manifest.write(&manifest_path(out))?;
    println!("sweep table written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle_check(out: Option<&Path>, iterations: usize, seed: u64) -> Result<ExitCode> {
    let results = checks::run_oracle_checks(iterations, seed)?;
    let mut all_pass = true;
    for r in &results {
        println!(
            "{}: {} = {:.5} (threshold {:.5}) ... {}",
            r.case,
            r.metric,
            r.value,
            r.threshold,
            if r.pass { "pass" } else { "FAIL" }
        );
        all_pass &= r.pass;
    }
    if let Some(out) = out {
        let (tmp, mut w) = atomic_writer(out)?;
        writeln!(w, "case,metric,value,threshold,pass")?;
        for r in &results {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.case, r.metric, r.value, r.threshold, r.pass
            )?;
        }
        finish_atomic(tmp, w, out)?;
    }
    if all_pass {
        println!("oracle checks: {} case(s) pass", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("oracle checks: at least one case failed");
        Ok(ExitCode::from(3))
    }
}

fn cmd_inspect_model(path: &Path) -> Result<ExitCode> {
    let model = FmcaModel::load(path)?;
    println!("model: {}", path.display());
    println!(
        "f-network: input {} -> {} hidden layer(s) of width {} -> {} outputs ({:?}, {:?} head)",
        model.params_f.input_dim(),
        model.params_f.layers.len() - 1,
        model
            .params_f
            .layers
            .first()
            .map(|l| l.out_dim())
            .unwrap_or(0),
        model.params_f.output_dim(),
        model.params_f.activation,
        model.config.fmca.head,
    );
    println!(
        "parameters: f {} + g {}",
        model.params_f.param_count(),
        model.params_g.param_count()
    );
    println!(
        "spectrum: {}",
        model
            .head
            .sigma
            .iter()
            .map(|s| format!("{s:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("--- config snapshot ---");
    print!("{}", model.config.to_toml_string());
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(kind: &str, out: &Path, per_class: usize, seed: u64) -> Result<ExitCode> {
    let signals = match kind {
        "tones" => synth::tone_corpus(4, per_class, seed),
        "chirps" => synth::chirp_corpus(per_class, seed),
        "digits" => synth::digit_corpus(per_class, seed),
        other => {
            return Err(Error::InvalidConfig {
                key: "synth.kind".into(),
                reason: format!("unknown kind `{other}`; expected tones, chirps, or digits"),
            })
        }
    };
    synth::write_corpus_wavs(out, &signals)?;
    println!("wrote {} WAV file(s) to {}", signals.len(), out.display());
    Ok(ExitCode::SUCCESS)
}
