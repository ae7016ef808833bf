//! Corpus handling: loading labeled WAV directories, running the
//! preprocessing pipeline with a skip-don't-fail policy, and the on-disk
//! frame cache (per-utterance binary blocks plus a plain-text index).
//!
//! The cache keeps two block kinds per utterance: the trimmed, normalized
//! signal (`.sig`) and the framed representation for the configured frame
//! length, stride, and domain (`.fmb`). Frame blocks feed training and
//! evaluation directly; signal blocks let hyperparameter sweeps re-frame
//! under different L and S without touching the source corpus.
//!
//! Everything is deterministic: directory listings are sorted, blocks are
//! bit-stable 64-bit little-endian floats, and re-running preprocessing on
//! an unchanged corpus reproduces the cache byte for byte.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::config::SignalConfig;
use crate::error::{Error, Result};
use crate::signal::{self, AudioSignal, Domain, FrameBatch};

const FRAME_MAGIC: &[u8; 4] = b"FMCB";
const SIGNAL_MAGIC: &[u8; 4] = b"FMCS";
const CACHE_VERSION: u32 = 1;

/// Identity of one utterance within a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceMeta {
    pub id: String,
    pub label: u32,
    pub speaker: Option<String>,
}

/// A normalized, endpoint-trimmed recording.
#[derive(Debug, Clone)]
pub struct TrimmedUtterance {
    pub meta: UtteranceMeta,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// All recordings that survived normalization and trimming, before framing.
#[derive(Debug, Clone, Default)]
pub struct TrimmedCorpus {
    pub utterances: Vec<TrimmedUtterance>,
}

impl TrimmedCorpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// A preprocessed corpus: one frame batch per utterance, in a stable order.
#[derive(Debug, Clone)]
pub struct FrameDataset {
    pub utterances: Vec<UtteranceMeta>,
    pub batches: Vec<FrameBatch>,
}

impl FrameDataset {
    pub fn new(utterances: Vec<UtteranceMeta>, mut batches: Vec<FrameBatch>) -> Self {
        assert_eq!(utterances.len(), batches.len());
        for (i, b) in batches.iter_mut().enumerate() {
            b.utt_index = i as u32;
        }
        FrameDataset {
            utterances,
            batches,
        }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Network input width of the frames (equal across batches).
    pub fn width(&self) -> usize {
        self.batches.first().map(|b| b.width()).unwrap_or(0)
    }

    pub fn total_frames(&self) -> usize {
        self.batches.iter().map(|b| b.num_frames()).sum()
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let mut labels: Vec<u32> = self.utterances.iter().map(|u| u.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// One skipped utterance and why.
#[derive(Debug, Clone)]
pub struct SkipEntry {
    pub utterance: String,
    pub reason: String,
}

/// Result of preprocessing a set of recordings.
#[derive(Debug)]
pub struct PreprocessOutcome {
    pub corpus: TrimmedCorpus,
    pub dataset: FrameDataset,
    pub skipped: Vec<SkipEntry>,
}

/// Loads every `.wav` under `dir` (sorted by file name), parsing labels and
/// speakers from the file stem with the configured pattern. Unparseable or
/// unreadable files are skipped and logged, not fatal.
pub fn load_corpus(dir: &Path, cfg: &SignalConfig) -> Result<(Vec<AudioSignal>, Vec<SkipEntry>)> {
    let pattern = regex::Regex::new(&cfg.filename_pattern).map_err(|e| Error::InvalidConfig {
        key: "signal.filename_pattern".into(),
        reason: e.to_string(),
    })?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .map(|x| x.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();

    let mut signals = Vec::new();
    let mut skipped = Vec::new();
    for path in &paths {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let caps = match pattern.captures(&stem) {
            Some(c) => c,
            None => {
                skipped.push(SkipEntry {
                    utterance: stem.clone(),
                    reason: "file name does not match the label pattern".into(),
                });
                continue;
            }
        };
        let label: u32 = match caps.name("label").and_then(|m| m.as_str().parse().ok()) {
            Some(l) => l,
            None => {
                skipped.push(SkipEntry {
                    utterance: stem.clone(),
                    reason: "label capture is not an integer".into(),
                });
                continue;
            }
        };
        let speaker = caps.name("speaker").map(|m| m.as_str().to_string());
        match signal::read_wav(path) {
            Ok(mut s) => {
                s.label = Some(label);
                s.speaker_id = speaker;
                signals.push(s);
            }
            Err(e) => skipped.push(SkipEntry {
                utterance: stem.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if signals.is_empty() {
        return Err(Error::NoValidFiles {
            dir: dir.to_path_buf(),
        });
    }
    Ok((signals, skipped))
}

/// Normalizes and endpoint-trims each labeled recording.
pub fn trim_corpus(
    signals: Vec<AudioSignal>,
    cfg: &SignalConfig,
) -> (TrimmedCorpus, Vec<SkipEntry>) {
    let mut corpus = TrimmedCorpus::default();
    let mut skipped = Vec::new();
    for sig in signals {
        let id = sig.utterance_id.clone();
        let Some(label) = sig.label else {
            skipped.push(SkipEntry {
                utterance: id,
                reason: "missing label".into(),
            });
            continue;
        };
        let speaker = sig.speaker_id.clone();
        let sample_rate = sig.sample_rate;
        let trimmed = signal::normalize(sig)
            .and_then(|s| signal::trim_silence(s, cfg.trim_threshold, cfg.trim_window));
        match trimmed {
            Ok(s) => corpus.utterances.push(TrimmedUtterance {
                meta: UtteranceMeta {
                    id,
                    label,
                    speaker,
                },
                samples: s.samples,
                sample_rate,
            }),
            Err(e) => {
                log::warn!("skipping {id}: {e}");
                skipped.push(SkipEntry {
                    utterance: id,
                    reason: e.to_string(),
                });
            }
        }
    }
    (corpus, skipped)
}

/// Frames a trimmed corpus under the configured L, S, and domain.
/// Utterances shorter than one frame are skipped and logged (no padding).
pub fn frame_corpus(
    corpus: &TrimmedCorpus,
    cfg: &SignalConfig,
) -> Result<(FrameDataset, Vec<SkipEntry>)> {
    let mut utterances = Vec::new();
    let mut batches = Vec::new();
    let mut skipped = Vec::new();
    for utt in &corpus.utterances {
        let sig = AudioSignal {
            samples: utt.samples.clone(),
            sample_rate: utt.sample_rate,
            label: Some(utt.meta.label),
            speaker_id: utt.meta.speaker.clone(),
            utterance_id: utt.meta.id.clone(),
        };
        let framed = signal::frame(&sig, cfg.frame_len, cfg.stride).and_then(|b| match cfg.domain
        {
            Domain::Temporal => Ok(b),
            Domain::Spectral => signal::to_spectral(&b),
        });
        match framed {
            Ok(b) => {
                utterances.push(utt.meta.clone());
                batches.push(b);
            }
            Err(e @ Error::SignalTooShort { .. }) => {
                log::warn!("skipping {}: {e}", utt.meta.id);
                skipped.push(SkipEntry {
                    utterance: utt.meta.id.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((FrameDataset::new(utterances, batches), skipped))
}

/// Full preprocessing: normalize, trim, frame, transform.
pub fn preprocess_signals(
    signals: Vec<AudioSignal>,
    cfg: &SignalConfig,
) -> Result<PreprocessOutcome> {
    let (corpus, mut skipped) = trim_corpus(signals, cfg);
    let (dataset, frame_skips) = frame_corpus(&corpus, cfg)?;
    skipped.extend(frame_skips);
    Ok(PreprocessOutcome {
        corpus,
        dataset,
        skipped,
    })
}

/// SHA-256 over sorted relative paths and file contents, hex encoded.
/// Used to pin dataset identity in run manifests.
pub fn fingerprint_dir(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    hasher.update((files.len() as u64).to_le_bytes());
    for rel in &files {
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        let bytes = fs::read(dir.join(rel))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex_string(&hasher.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("path under root")
                .to_string_lossy()
                .replace('\\', "/");
            out.push(rel);
        }
    }
    Ok(())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// --- frame cache ----------------------------------------------------------

/// Cache metadata stored next to the blocks.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CacheMeta {
    pub version: u32,
    pub signal: SignalConfig,
    pub source_fingerprint: String,
    pub utterances: usize,
    pub framed: usize,
    pub skipped: usize,
}

/// Writes the preprocessed corpus: `.sig` blocks for every trimmed
/// utterance, `.fmb` blocks for those long enough to frame, plus
/// `index.tsv`, `skipped.tsv`, and `meta.toml`. All writes go through a
/// temporary file and an atomic rename.
pub fn write_cache(
    dir: &Path,
    outcome: &PreprocessOutcome,
    cfg: &SignalConfig,
    source_fingerprint: &str,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let framed_ids: std::collections::HashMap<&str, usize> = outcome
        .dataset
        .utterances
        .iter()
        .enumerate()
        .map(|(i, u)| (u.id.as_str(), i))
        .collect();

    let mut index = String::new();
    for utt in &outcome.corpus.utterances {
        write_signal_block(&dir.join(format!("{}.sig", utt.meta.id)), utt)?;
        let (frames, width) = match framed_ids.get(utt.meta.id.as_str()) {
            Some(&i) => {
                let batch = &outcome.dataset.batches[i];
                write_frame_block(&dir.join(format!("{}.fmb", utt.meta.id)), batch)?;
                (batch.num_frames(), batch.width())
            }
            None => (0, 0),
        };
        index.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            utt.meta.id,
            utt.meta.label,
            utt.meta.speaker.as_deref().unwrap_or("-"),
            frames,
            width
        ));
    }
    write_atomic(&dir.join("index.tsv"), index.as_bytes())?;

    let mut skipped = String::new();
    for s in &outcome.skipped {
        skipped.push_str(&format!("{}\t{}\n", s.utterance, s.reason));
    }
    write_atomic(&dir.join("skipped.tsv"), skipped.as_bytes())?;

    let meta = CacheMeta {
        version: CACHE_VERSION,
        signal: cfg.clone(),
        source_fingerprint: source_fingerprint.to_string(),
        utterances: outcome.corpus.len(),
        framed: outcome.dataset.len(),
        skipped: outcome.skipped.len(),
    };
    let meta_text = toml::to_string(&meta).expect("meta serializes");
    write_atomic(&dir.join("meta.toml"), meta_text.as_bytes())?;
    Ok(())
}

fn read_index(dir: &Path) -> Result<Vec<(UtteranceMeta, usize, usize)>> {
    let index = fs::read_to_string(dir.join("index.tsv"))?;
    let mut rows = Vec::new();
    for (line_no, line) in index.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::BadContainer {
                reason: format!("index.tsv line {}: expected 5 fields", line_no + 1),
            });
        }
        let label: u32 = fields[1].parse().map_err(|_| Error::BadContainer {
            reason: format!("index.tsv line {}: bad label", line_no + 1),
        })?;
        let frames: usize = fields[3].parse().map_err(|_| Error::BadContainer {
            reason: format!("index.tsv line {}: bad frame count", line_no + 1),
        })?;
        let width: usize = fields[4].parse().map_err(|_| Error::BadContainer {
            reason: format!("index.tsv line {}: bad width", line_no + 1),
        })?;
        rows.push((
            UtteranceMeta {
                id: fields[0].to_string(),
                label,
                speaker: if fields[2] == "-" {
                    None
                } else {
                    Some(fields[2].to_string())
                },
            },
            frames,
            width,
        ));
    }
    Ok(rows)
}

pub fn read_cache_meta(dir: &Path) -> Result<CacheMeta> {
    let meta_text = fs::read_to_string(dir.join("meta.toml"))?;
    let meta: CacheMeta = toml::from_str(&meta_text).map_err(|e| Error::BadContainer {
        reason: format!("meta.toml: {e}"),
    })?;
    if meta.version != CACHE_VERSION {
        return Err(Error::BadContainer {
            reason: format!("unsupported cache version {}", meta.version),
        });
    }
    Ok(meta)
}

/// Reads the framed view of a cache.
pub fn read_frame_cache(dir: &Path) -> Result<(FrameDataset, CacheMeta)> {
    let meta = read_cache_meta(dir)?;
    let mut utterances = Vec::new();
    let mut batches = Vec::new();
    for (meta_u, frames, _) in read_index(dir)? {
        if frames == 0 {
            continue;
        }
        batches.push(read_frame_block(&dir.join(format!("{}.fmb", meta_u.id)))?);
        utterances.push(meta_u);
    }
    if utterances.is_empty() {
        return Err(Error::NoValidFiles {
            dir: dir.to_path_buf(),
        });
    }
    Ok((FrameDataset::new(utterances, batches), meta))
}

/// Reads the trimmed-signal view of a cache (for re-framing sweeps).
pub fn read_signal_cache(dir: &Path) -> Result<(TrimmedCorpus, CacheMeta)> {
    let meta = read_cache_meta(dir)?;
    let mut corpus = TrimmedCorpus::default();
    for (meta_u, _, _) in read_index(dir)? {
        let (samples, sample_rate) =
            read_signal_block(&dir.join(format!("{}.sig", meta_u.id)))?;
        corpus.utterances.push(TrimmedUtterance {
            meta: meta_u,
            samples,
            sample_rate,
        });
    }
    if corpus.is_empty() {
        return Err(Error::NoValidFiles {
            dir: dir.to_path_buf(),
        });
    }
    Ok((corpus, meta))
}

fn write_frame_block(path: &Path, batch: &FrameBatch) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + batch.frames.len() * 8);
    buf.extend_from_slice(FRAME_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.push(match batch.domain {
        Domain::Temporal => 0,
        Domain::Spectral => 1,
    });
    buf.extend_from_slice(&(batch.frame_len as u32).to_le_bytes());
    buf.extend_from_slice(&(batch.stride as u32).to_le_bytes());
    buf.extend_from_slice(&(batch.num_frames() as u32).to_le_bytes());
    buf.extend_from_slice(&(batch.width() as u32).to_le_bytes());
    for v in batch.frames.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &buf)
}

fn read_frame_block(path: &Path) -> Result<FrameBatch> {
    let file = fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FRAME_MAGIC {
        return Err(Error::BadContainer {
            reason: format!("{}: bad magic", path.display()),
        });
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(Error::BadContainer {
            reason: format!("{}: unsupported version {version}", path.display()),
        });
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let domain = match tag[0] {
        0 => Domain::Temporal,
        1 => Domain::Spectral,
        other => {
            return Err(Error::BadContainer {
                reason: format!("{}: unknown domain tag {other}", path.display()),
            })
        }
    };
    let frame_len = read_u32(&mut r)? as usize;
    let stride = read_u32(&mut r)? as usize;
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let values = read_f64s(&mut r, rows * cols)?;
    let frames = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::BadContainer {
        reason: format!("{}: {e}", path.display()),
    })?;
    Ok(FrameBatch {
        frames,
        frame_len,
        stride,
        domain,
        utt_index: 0,
    })
}

fn write_signal_block(path: &Path, utt: &TrimmedUtterance) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + utt.samples.len() * 8);
    buf.extend_from_slice(SIGNAL_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&utt.sample_rate.to_le_bytes());
    buf.extend_from_slice(&(utt.samples.len() as u32).to_le_bytes());
    for v in &utt.samples {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &buf)
}

fn read_signal_block(path: &Path) -> Result<(Vec<f64>, u32)> {
    let file = fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SIGNAL_MAGIC {
        return Err(Error::BadContainer {
            reason: format!("{}: bad magic", path.display()),
        });
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(Error::BadContainer {
            reason: format!("{}: unsupported version {version}", path.display()),
        });
    }
    let sample_rate = read_u32(&mut r)?;
    let len = read_u32(&mut r)? as usize;
    Ok((read_f64s(&mut r, len)?, sample_rate))
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Writes through a sibling temp file and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(bytes)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
