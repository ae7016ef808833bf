//! Classification of power features with a single-hidden-layer perceptron,
//! plus the stratified cross-validation harness and hyperparameter sweeps.
//!
//! The classifier reuses the network machinery (one hidden layer with layer
//! norm and tanh, softmax head, Adam) with full-batch epochs, early stopping
//! on a training cross-entropy plateau, and optional per-dimension z-scoring
//! from training-split statistics.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ClassifierConfig, PipelineConfig};
use crate::dataset::{FrameDataset, TrimmedCorpus};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureMatrix};
use crate::fmca::{train_fmca, FmcaModel};
use crate::neural::{
    adam_step, backward, forward, forward_outputs, AdamState, NetworkParams, OutputHead,
};

/// Softmax probabilities below this floor are clamped in the cross-entropy
/// gradient to keep 1/y finite.
const PROB_FLOOR: f64 = 1e-12;

/// A trained feature classifier: standardization statistics, the label
/// table, and the network.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub params: NetworkParams,
    /// Per-dimension mean subtracted before the network (zeros when
    /// standardization is off).
    pub feature_mean: Array1<f64>,
    /// Per-dimension reciprocal scale (ones when standardization is off).
    pub feature_scale: Array1<f64>,
    /// Output slot -> class label, ascending.
    pub classes: Vec<u32>,
    pub train_accuracy: f64,
    pub train_cross_entropy: f64,
    pub epochs_run: usize,
}

fn feature_rows(features: &[FeatureMatrix]) -> Result<(Array2<f64>, Vec<u32>)> {
    let first = features.first().expect("non-empty feature set");
    let (k, t) = (first.k(), first.t());
    let width = k * t;
    let mut x = Array2::zeros((features.len(), width));
    let mut labels = Vec::with_capacity(features.len());
    for (row, fm) in features.iter().enumerate() {
        if fm.k() != k || fm.t() != t {
            return Err(Error::InconsistentFeatureShape {
                expected_rows: k,
                expected_cols: t,
                rows: fm.k(),
                cols: fm.t(),
            });
        }
        for (col, v) in fm.values.iter().enumerate() {
            x[[row, col]] = *v;
        }
        labels.push(fm.label);
    }
    Ok((x, labels))
}

/// Trains the perceptron on labeled feature matrices. Needs at least two
/// classes and a consistent K x T shape across samples.
pub fn train_classifier(
    features: &[FeatureMatrix],
    cfg: &ClassifierConfig,
    standardize: bool,
    seed: u64,
) -> Result<Classifier> {
    if features.is_empty() {
        return Err(Error::InsufficientData {
            reason: "no training features".into(),
        });
    }
    let (mut x, labels) = feature_rows(features)?;
    let mut classes: Vec<u32> = labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InsufficientData {
            reason: format!("classifier needs at least 2 classes, found {}", classes.len()),
        });
    }
    let width = x.ncols();
    let n = x.nrows();

    let (mean, scale) = if standardize {
        let mean = x.mean_axis(ndarray::Axis(0)).expect("non-empty");
        let mut var = Array1::<f64>::zeros(width);
        for row in x.rows() {
            for (j, v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        let scale = var.mapv(|v| {
            let sd = (v / n as f64).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                1.0
            }
        });
        (mean, scale)
    } else {
        (Array1::zeros(width), Array1::ones(width))
    };
    for mut row in x.rows_mut() {
        for j in 0..width {
            row[j] = (row[j] - mean[j]) * scale[j];
        }
    }

    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut params = NetworkParams::init(
        width,
        cfg.hidden_width,
        1,
        classes.len(),
        crate::neural::Activation::Tanh,
        &mut rng,
    );
    let mut adam = AdamState::new(&params, cfg.learning_rate);

    let mut best_ce = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_run = 0usize;
    let inv_n = 1.0 / n as f64;
    for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        let (y, tape) = forward(&params, &x.view(), OutputHead::Softmax)?;
        let mut ce = 0.0;
        let mut upstream = Array2::zeros(y.raw_dim());
        for (i, &t) in targets.iter().enumerate() {
            let p = y[[i, t]].max(PROB_FLOOR);
            ce -= p.ln() * inv_n;
            upstream[[i, t]] = -inv_n / p;
        }
        let (grads, _) = backward(&params, &tape, &upstream.view())?;
        adam_step(&mut params, &grads, &mut adam)?;

        if ce + 1e-12 < best_ce {
            best_ce = ce;
            best_epoch = epoch;
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    // Final training metrics with the trained weights.
    let y = forward_outputs(&params, &x.view(), OutputHead::Softmax)?;
    let mut correct = 0usize;
    let mut ce = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        ce -= y[[i, t]].max(PROB_FLOOR).ln() * inv_n;
        if argmax(&y.row(i)) == t {
            correct += 1;
        }
    }

    Ok(Classifier {
        params,
        feature_mean: mean,
        feature_scale: scale,
        classes,
        train_accuracy: correct as f64 / n as f64,
        train_cross_entropy: ce,
        epochs_run,
    })
}

fn argmax(row: &ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl Classifier {
    /// Predicted class label for one feature matrix.
    pub fn predict(&self, fm: &FeatureMatrix) -> Result<u32> {
        let width = self.feature_mean.len();
        let flat = fm.flatten();
        if flat.len() != width {
            return Err(Error::InconsistentFeatureShape {
                expected_rows: width,
                expected_cols: 1,
                rows: flat.len(),
                cols: 1,
            });
        }
        let mut x = Array2::zeros((1, width));
        for (j, v) in flat.iter().enumerate() {
            x[[0, j]] = (v - self.feature_mean[j]) * self.feature_scale[j];
        }
        let y = forward_outputs(&self.params, &x.view(), OutputHead::Softmax)?;
        Ok(self.classes[argmax(&y.row(0))])
    }

    /// Fraction of feature matrices whose prediction matches their label.
    pub fn accuracy(&self, features: &[FeatureMatrix]) -> Result<f64> {
        if features.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for fm in features {
            if self.predict(fm)? == fm.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / features.len() as f64)
    }
}

/// Disjoint, exhaustive test folds stratified by class and speaker.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    /// Test utterance indices per fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Deals each class's utterances (grouped and shuffled per speaker)
    /// round-robin across folds, so per-fold class counts differ by at most
    /// one and speakers spread evenly.
    pub fn stratified(dataset: &FrameDataset, folds: usize, seed: u64) -> Result<FoldPlan> {
        if folds < 2 {
            return Err(Error::InsufficientData {
                reason: format!("need at least 2 folds, got {folds}"),
            });
        }
        let classes = dataset.classes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
        let mut plan = vec![Vec::new(); folds];
        for class in &classes {
            // Group by speaker, deterministically ordered.
            let mut members: Vec<usize> = (0..dataset.len())
                .filter(|&i| dataset.utterances[i].label == *class)
                .collect();
            if members.len() < folds {
                return Err(Error::InsufficientData {
                    reason: format!(
                        "class {class} has {} utterance(s), fewer than {folds} folds",
                        members.len()
                    ),
                });
            }
            members.sort_by(|&a, &b| {
                let ua = &dataset.utterances[a];
                let ub = &dataset.utterances[b];
                (&ua.speaker, &ua.id).cmp(&(&ub.speaker, &ub.id))
            });
            // Shuffle within each speaker run, then deal round-robin.
            let mut start = 0;
            while start < members.len() {
                let speaker = dataset.utterances[members[start]].speaker.clone();
                let mut end = start + 1;
                while end < members.len()
                    && dataset.utterances[members[end]].speaker == speaker
                {
                    end += 1;
                }
                for i in (start + 1..end).rev() {
                    let j = start + rng.gen_range(0..=i - start);
                    members.swap(i, j);
                }
                start = end;
            }
            let offset = rng.gen_range(0..folds);
            for (pos, &utt) in members.iter().enumerate() {
                plan[(pos + offset) % folds].push(utt);
            }
        }
        for fold in &mut plan {
            fold.sort_unstable();
        }
        // Each training split must keep every class pairable.
        for fold in 0..folds {
            let mut counts = std::collections::BTreeMap::new();
            for (f, test) in plan.iter().enumerate() {
                if f == fold {
                    continue;
                }
                for &utt in test {
                    *counts.entry(dataset.utterances[utt].label).or_insert(0usize) += 1;
                }
            }
            for class in &classes {
                if counts.get(class).copied().unwrap_or(0) < 2 {
                    return Err(Error::InsufficientData {
                        reason: format!(
                            "class {class} would have fewer than 2 train utterances in fold {fold}"
                        ),
                    });
                }
            }
        }
        Ok(FoldPlan { folds: plan })
    }

    pub fn num_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (f, test) in self.folds.iter().enumerate() {
            if f != fold {
                out.extend_from_slice(test);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Accuracy of one train/test split, with the artifacts that produced it.
#[derive(Debug)]
pub struct SplitEvaluation {
    pub accuracy: f64,
    pub test_scored: usize,
    pub test_skipped: usize,
    pub model: FmcaModel,
    pub classifier: Classifier,
}

/// Full pipeline on one split: train the projector networks on the train
/// utterances, fit the head, extract K x T power features, train the
/// classifier, and score the held-out utterances. Test utterances whose
/// traces are shorter than T are skipped and logged.
pub fn evaluate_split(
    dataset: &FrameDataset,
    train: &[usize],
    test: &[usize],
    config: &PipelineConfig,
) -> Result<SplitEvaluation> {
    let training = train_fmca(dataset, train, config)?;
    if let Some(iter) = training.diverged_at {
        return Err(Error::NonFiniteGradient { iteration: iter });
    }
    let model = training.model;
    let intervals = config.features.intervals;

    let mut train_features = Vec::with_capacity(train.len());
    for &utt in train {
        let trace = model.project(&dataset.batches[utt])?;
        match extract_features(
            &trace.view(),
            intervals,
            &dataset.utterances[utt].id,
            dataset.utterances[utt].label,
        ) {
            Ok(fm) => train_features.push(fm),
            Err(e @ Error::TraceTooShort { .. }) => {
                log::warn!("skipping train utterance {}: {e}", dataset.utterances[utt].id);
            }
            Err(e) => return Err(e),
        }
    }
    let classifier = train_classifier(
        &train_features,
        &config.classifier,
        config.features.standardize,
        config.run.seed,
    )?;

    let mut correct = 0usize;
    let mut scored = 0usize;
    let mut skipped = 0usize;
    for &utt in test {
        let trace = model.project(&dataset.batches[utt])?;
        let fm = match extract_features(
            &trace.view(),
            intervals,
            &dataset.utterances[utt].id,
            dataset.utterances[utt].label,
        ) {
            Ok(fm) => fm,
            Err(Error::TraceTooShort { .. }) => {
                log::warn!("skipping test utterance {}", dataset.utterances[utt].id);
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        scored += 1;
        if classifier.predict(&fm)? == fm.label {
            correct += 1;
        }
    }
    if scored == 0 {
        return Err(Error::InsufficientData {
            reason: "no test utterance could be scored".into(),
        });
    }
    Ok(SplitEvaluation {
        accuracy: correct as f64 / scored as f64,
        test_scored: scored,
        test_skipped: skipped,
        model,
        classifier,
    })
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub test_scored: usize,
}

#[derive(Debug, Clone)]
pub struct CrossValReport {
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    pub std: f64,
}

impl CrossValReport {
    fn from_folds(folds: Vec<FoldResult>) -> Self {
        let n = folds.len().max(1) as f64;
        let mean = folds.iter().map(|f| f.accuracy).sum::<f64>() / n;
        let var = folds
            .iter()
            .map(|f| (f.accuracy - mean) * (f.accuracy - mean))
            .sum::<f64>()
            / n;
        CrossValReport {
            folds,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Stratified k-fold cross-validation of the full pipeline. Fold `i` trains
/// with seed `config.run.seed + i`, so identical seeds reproduce identical
/// fold accuracies.
pub fn cross_validate(
    dataset: &FrameDataset,
    config: &PipelineConfig,
    folds: usize,
) -> Result<CrossValReport> {
    let plan = FoldPlan::stratified(dataset, folds, config.run.seed)?;
    let mut results = Vec::with_capacity(folds);
    for fold in 0..folds {
        let mut fold_cfg = config.clone();
        fold_cfg.run.seed = config.run.seed.wrapping_add(fold as u64);
        let eval = evaluate_split(
            dataset,
            &plan.train_indices(fold),
            plan.test_indices(fold),
            &fold_cfg,
        )?;
        log::info!(
            "fold {fold}: accuracy {:.4} over {} utterances",
            eval.accuracy,
            eval.test_scored
        );
        results.push(FoldResult {
            fold,
            accuracy: eval.accuracy,
            test_scored: eval.test_scored,
        });
    }
    Ok(CrossValReport::from_folds(results))
}

/// The four sweepable hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    FrameLen,
    Stride,
    ProjectionDim,
    Intervals,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L" | "FRAME_LEN" => Ok(SweepParam::FrameLen),
            "S" | "STRIDE" => Ok(SweepParam::Stride),
            "K" | "PROJECTION_DIM" => Ok(SweepParam::ProjectionDim),
            "T" | "INTERVALS" => Ok(SweepParam::Intervals),
            other => Err(Error::InvalidConfig {
                key: "sweep.param".into(),
                reason: format!("unknown parameter `{other}`; expected L, S, K, or T"),
            }),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepParam::FrameLen => "L",
            SweepParam::Stride => "S",
            SweepParam::ProjectionDim => "K",
            SweepParam::Intervals => "T",
        };
        write!(f, "{s}")
    }
}

pub fn apply_sweep_value(config: &mut PipelineConfig, param: SweepParam, value: usize) {
    match param {
        SweepParam::FrameLen => config.signal.frame_len = value,
        SweepParam::Stride => config.signal.stride = value,
        SweepParam::ProjectionDim => config.fmca.projection_dim = value,
        SweepParam::Intervals => config.features.intervals = value,
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: usize,
    pub report: CrossValReport,
}

#[derive(Debug)]
pub struct SweepReport {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

/// Cross-validates once per parameter value, re-framing the trimmed corpus
/// so that L and S sweeps regenerate the frames they need. All other
/// parameters come from `base`.
pub fn sweep(
    corpus: &TrimmedCorpus,
    base: &PipelineConfig,
    param: SweepParam,
    values: &[usize],
    folds: usize,
) -> Result<SweepReport> {
    assert!(!values.is_empty(), "sweep needs at least one value");
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base.clone();
        apply_sweep_value(&mut cfg, param, value);
        cfg.validate()?;
        let (dataset, skipped) = crate::dataset::frame_corpus(corpus, &cfg.signal)?;
        if !skipped.is_empty() {
            log::info!("{param}={value}: {} utterance(s) skipped by framing", skipped.len());
        }
        let report = cross_validate(&dataset, &cfg, folds)?;
        log::info!("{param}={value}: mean accuracy {:.4}", report.mean);
        points.push(SweepPoint { value, report });
    }
    Ok(SweepReport { param, points })
}

/// Sweep CSV: `param,value,fold,accuracy` data rows followed by `mean` and
/// `std` aggregate rows per value.
pub fn export_sweep_csv<W: Write>(w: &mut W, report: &SweepReport) -> Result<()> {
    writeln!(w, "param,value,fold,accuracy")?;
    for point in &report.points {
        for fr in &point.report.folds {
            writeln!(w, "{},{},{},{}", report.param, point.value, fr.fold, fr.accuracy)?;
        }
        writeln!(w, "{},{},mean,{}", report.param, point.value, point.report.mean)?;
        writeln!(w, "{},{},std,{}", report.param, point.value, point.report.std)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn blob_features(
        count: usize,
        label: u32,
        center: f64,
        spread: f64,
        rng: &mut ChaCha8Rng,
    ) -> Vec<FeatureMatrix> {
        (0..count)
            .map(|i| FeatureMatrix {
                values: Array2::from_shape_fn((2, 2), |_| center + spread * rng.gen_range(-1.0..1.0)),
                utterance_id: format!("{label}_{i}"),
                label,
            })
            .collect()
    }

    #[test]
    fn separable_blobs_reach_full_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut train = blob_features(60, 0, 0.0, 0.3, &mut rng);
        train.extend(blob_features(60, 1, 3.0, 0.3, &mut rng));
        let cfg = ClassifierConfig {
            epochs: 200,
            ..ClassifierConfig::default()
        };
        let clf = train_classifier(&train, &cfg, true, 7).unwrap();
        let mut test = blob_features(30, 0, 0.0, 0.3, &mut rng);
        test.extend(blob_features(30, 1, 3.0, 0.3, &mut rng));
        let acc = clf.accuracy(&test).unwrap();
        assert_eq!(acc, 1.0, "expected perfect separation, got {acc}");
        assert!(clf.train_accuracy == 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let train = blob_features(10, 3, 0.0, 0.1, &mut rng);
        assert!(matches!(
            train_classifier(&train, &ClassifierConfig::default(), true, 0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn inconsistent_shapes_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut train = blob_features(5, 0, 0.0, 0.1, &mut rng);
        train.extend(blob_features(5, 1, 1.0, 0.1, &mut rng));
        train[3].values = Array2::zeros((3, 2));
        assert!(matches!(
            train_classifier(&train, &ClassifierConfig::default(), true, 0),
            Err(Error::InconsistentFeatureShape { .. })
        ));
    }

    #[test]
    fn shuffled_labels_score_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Features carry no class signal once labels are shuffled.
        let mut train = blob_features(150, 0, 0.0, 1.0, &mut rng);
        train.extend(blob_features(150, 1, 0.0, 1.0, &mut rng));
        for fm in train.iter_mut() {
            fm.label = if rng.gen_bool(0.5) { 0 } else { 1 };
        }
        let cfg = ClassifierConfig {
            epochs: 150,
            ..ClassifierConfig::default()
        };
        let clf = train_classifier(&train, &cfg, true, 11).unwrap();
        let mut test = blob_features(200, 0, 0.0, 1.0, &mut rng);
        test.extend(blob_features(200, 1, 0.0, 1.0, &mut rng));
        for fm in test.iter_mut() {
            fm.label = if rng.gen_bool(0.5) { 0 } else { 1 };
        }
        let acc = clf.accuracy(&test).unwrap();
        assert!(
            (acc - 0.5).abs() <= 0.10,
            "shuffled labels should score near 1/2, got {acc}"
        );
    }

    #[test]
    fn prediction_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut train = blob_features(20, 0, 0.0, 0.4, &mut rng);
        train.extend(blob_features(20, 1, 2.0, 0.4, &mut rng));
        let clf = train_classifier(&train, &ClassifierConfig::default(), true, 0).unwrap();
        for fm in &train {
            assert_eq!(clf.predict(fm).unwrap(), clf.predict(fm).unwrap());
        }
    }

    fn fold_test_dataset(per_class: usize) -> FrameDataset {
        let signals = crate::synth::tone_corpus(3, per_class, 17);
        let cfg = crate::config::SignalConfig {
            frame_len: 32,
            stride: 8,
            domain: crate::signal::Domain::Spectral,
            trim_threshold: 0.02,
            trim_window: 32,
            ..crate::config::SignalConfig::default()
        };
        crate::dataset::preprocess_signals(signals, &cfg).unwrap().dataset
    }

    #[test]
    fn fold_plan_is_disjoint_exhaustive_and_balanced() {
        let ds = fold_test_dataset(10);
        let plan = FoldPlan::stratified(&ds, 5, 3).unwrap();
        assert_eq!(plan.num_folds(), 5);
        let mut seen = vec![false; ds.len()];
        for fold in 0..5 {
            for &utt in plan.test_indices(fold) {
                assert!(!seen[utt], "utterance {utt} in two folds");
                seen[utt] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "folds must cover the dataset");

        // Class balance within one utterance across folds.
        for class in ds.classes() {
            let counts: Vec<usize> = (0..5)
                .map(|f| {
                    plan.test_indices(f)
                        .iter()
                        .filter(|&&u| ds.utterances[u].label == class)
                        .count()
                })
                .collect();
            let lo = counts.iter().min().unwrap();
            let hi = counts.iter().max().unwrap();
            assert!(hi - lo <= 1, "class {class} spread {counts:?}");
        }

        // Train/test complement.
        let train = plan.train_indices(2);
        for &utt in plan.test_indices(2) {
            assert!(!train.contains(&utt));
        }
        assert_eq!(train.len() + plan.test_indices(2).len(), ds.len());
    }

    #[test]
    fn fold_plan_rejects_thin_classes() {
        let ds = fold_test_dataset(3);
        assert!(matches!(
            FoldPlan::stratified(&ds, 4, 0),
            Err(Error::InsufficientData { .. })
        ));
    }

    fn quick_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.signal.frame_len = 32;
        cfg.signal.stride = 8;
        cfg.signal.trim_window = 32;
        cfg.fmca.projection_dim = 4;
        cfg.fmca.hidden_width = 16;
        cfg.fmca.hidden_count = 1;
        cfg.fmca.iterations = 150;
        cfg.fmca.batch_size = 64;
        cfg.features.intervals = 2;
        cfg.classifier.epochs = 120;
        cfg
    }

    #[test]
    fn cross_validate_reports_and_reproduces() {
        let ds = fold_test_dataset(8);
        let cfg = quick_config();
        let a = cross_validate(&ds, &cfg, 4).unwrap();
        assert_eq!(a.folds.len(), 4);
        for fr in &a.folds {
            assert!((0.0..=1.0).contains(&fr.accuracy));
            assert!(fr.test_scored > 0);
        }
        assert!(a.mean >= 0.0 && a.mean <= 1.0);

        let b = cross_validate(&ds, &cfg, 4).unwrap();
        for (x, y) in a.folds.iter().zip(&b.folds) {
            assert_eq!(x.accuracy.to_bits(), y.accuracy.to_bits());
        }
    }

    #[test]
    fn sweep_single_value_matches_direct_cross_validation() {
        let signals = crate::synth::tone_corpus(3, 8, 17);
        let cfg = quick_config();
        let (corpus, _) = crate::dataset::trim_corpus(signals, &cfg.signal);
        let (dataset, _) = crate::dataset::frame_corpus(&corpus, &cfg.signal).unwrap();

        let direct = cross_validate(&dataset, &cfg, 3).unwrap();
        let swept = sweep(&corpus, &cfg, SweepParam::Intervals, &[2], 3).unwrap();
        assert_eq!(swept.points.len(), 1);
        assert_eq!(swept.points[0].report.mean.to_bits(), direct.mean.to_bits());

        let mut buf = Vec::new();
        export_sweep_csv(&mut buf, &swept).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "param,value,fold,accuracy");
        // 3 fold rows + mean + std.
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[4].starts_with("T,2,mean,"));
    }

    #[test]
    fn sweep_param_parsing() {
        assert_eq!("L".parse::<SweepParam>().unwrap(), SweepParam::FrameLen);
        assert_eq!("s".parse::<SweepParam>().unwrap(), SweepParam::Stride);
        assert_eq!("K".parse::<SweepParam>().unwrap(), SweepParam::ProjectionDim);
        assert_eq!("t".parse::<SweepParam>().unwrap(), SweepParam::Intervals);
        assert!("Q".parse::<SweepParam>().is_err());
    }
}
