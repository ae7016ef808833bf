//! Audio ingestion and preprocessing: peak normalization, energy-based
//! endpoint trimming, rectangular framing, and magnitude spectra.
//!
//! No tapering window is applied before the FFT and no zero padding is ever
//! added; utterances shorter than one frame are skipped by callers. All
//! transformations are pure and order-preserving on samples.

use std::io::Write as IoWrite;
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Input representation fed to the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Temporal,
    Spectral,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::Temporal => write!(f, "temporal"),
            Domain::Spectral => write!(f, "spectral"),
        }
    }
}

/// A mono recording with optional labeling metadata.
#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub label: Option<u32>,
    pub speaker_id: Option<String>,
    pub utterance_id: String,
}

/// Fixed-length frames of one utterance, W x D row-major. D equals the
/// frame length for temporal frames and half of it for spectral frames.
/// Rows keep temporal order: frame `i` starts at sample `i * stride`.
#[derive(Debug, Clone)]
pub struct FrameBatch {
    pub frames: Array2<f64>,
    /// Frame length L in samples (also the temporal width).
    pub frame_len: usize,
    pub stride: usize,
    pub domain: Domain,
    /// Index of the owning utterance within its dataset.
    pub utt_index: u32,
}

impl FrameBatch {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn width(&self) -> usize {
        self.frames.ncols()
    }

    /// Sample offset of a frame row in the trimmed signal.
    pub fn start_sample(&self, row: usize) -> usize {
        row * self.stride
    }
}

/// Scales the signal so the largest absolute sample is exactly one.
pub fn normalize(mut signal: AudioSignal) -> Result<AudioSignal> {
    let peak = signal.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return Err(Error::SilentSignal {
            utterance: signal.utterance_id,
        });
    }
    for s in &mut signal.samples {
        *s /= peak;
    }
    Ok(signal)
}

/// Threshold-based endpoint detector: keeps the span from the first to the
/// last analysis window whose mean-square energy exceeds `threshold_ratio`
/// squared, with boundaries snapped to the window grid. Windows are
/// non-overlapping; a trailing partial window is evaluated over its actual
/// length.
pub fn trim_silence(
    signal: AudioSignal,
    threshold_ratio: f64,
    window: usize,
) -> Result<AudioSignal> {
    assert!(
        threshold_ratio > 0.0 && threshold_ratio < 1.0,
        "threshold_ratio must lie in (0, 1)"
    );
    assert!(window >= 1, "window must be at least one sample");

    let n = signal.samples.len();
    let threshold = threshold_ratio * threshold_ratio;
    let mut first: Option<usize> = None;
    let mut last: Option<usize> = None;
    let mut w = 0usize;
    let mut start = 0usize;
    while start < n {
        let end = (start + window).min(n);
        let span = &signal.samples[start..end];
        let energy: f64 = span.iter().map(|s| s * s).sum::<f64>() / span.len() as f64;
        if energy > threshold {
            if first.is_none() {
                first = Some(w);
            }
            last = Some(w);
        }
        w += 1;
        start = end;
    }

    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::AllSilent {
            utterance: signal.utterance_id,
        });
    };
    let from = first * window;
    let to = ((last + 1) * window).min(n);
    Ok(AudioSignal {
        samples: signal.samples[from..to].to_vec(),
        ..signal
    })
}

/// Segments the signal into `floor((N - L) / S) + 1` rectangular frames of
/// `frame_len` samples with stride `stride`. No window function, no padding.
pub fn frame(signal: &AudioSignal, frame_len: usize, stride: usize) -> Result<FrameBatch> {
    assert!(frame_len >= 2, "frame length must be at least 2");
    assert!(stride >= 1, "stride must be at least 1");
    let n = signal.samples.len();
    if n < frame_len {
        return Err(Error::SignalTooShort {
            utterance: signal.utterance_id.clone(),
            len: n,
            frame_len,
        });
    }
    let count = (n - frame_len) / stride + 1;
    let mut frames = Array2::zeros((count, frame_len));
    for (i, mut row) in frames.rows_mut().into_iter().enumerate() {
        let start = i * stride;
        for (dst, &src) in row.iter_mut().zip(&signal.samples[start..start + frame_len]) {
            *dst = src;
        }
    }
    Ok(FrameBatch {
        frames,
        frame_len,
        stride,
        domain: Domain::Temporal,
        utt_index: 0,
    })
}

/// Replaces each temporal frame with the magnitudes of its discrete Fourier
/// bins `0 .. L/2 - 1` (DC retained, Nyquist dropped), halving the width.
pub fn to_spectral(batch: &FrameBatch) -> Result<FrameBatch> {
    assert_eq!(
        batch.domain,
        Domain::Temporal,
        "to_spectral expects temporal frames"
    );
    let len = batch.frame_len;
    if len % 2 != 0 {
        return Err(Error::OddFrameLength { frame_len: len });
    }
    let half = len / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    let mut out = Array2::zeros((batch.num_frames(), half));
    for (i, row) in batch.frames.rows().into_iter().enumerate() {
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            *b = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..half {
            out[[i, k]] = buf[k].norm();
        }
    }
    Ok(FrameBatch {
        frames: out,
        frame_len: batch.frame_len,
        stride: batch.stride,
        domain: Domain::Spectral,
        utt_index: batch.utt_index,
    })
}

/// Reads a mono 16-bit signed PCM WAV file; integer samples are mapped to
/// [-1, 1) by division by 32768 (peak normalization happens later).
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path).map_err(|e| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: format!("expected mono, found {} channels", spec.channels),
        });
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: format!(
                "expected 16-bit signed PCM, found {}-bit {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let sample_rate = spec.sample_rate;
    let samples: std::result::Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples = samples.map_err(|e| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let utterance_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(AudioSignal {
        samples: samples.iter().map(|&s| s as f64 / 32768.0).collect(),
        sample_rate,
        label: None,
        speaker_id: None,
        utterance_id,
    })
}

/// Writes samples in [-1, 1] as a mono 16-bit PCM WAV file.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for &s in samples {
        let v = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(())
}

/// Debug CSV export: one frame per row with header `utt,frame_idx,v0..v{D-1}`.
pub fn export_frames_csv<W: IoWrite>(w: &mut W, batch: &FrameBatch, utt_id: &str) -> Result<()> {
    write!(w, "utt,frame_idx")?;
    for d in 0..batch.width() {
        write!(w, ",v{d}")?;
    }
    writeln!(w)?;
    for (i, row) in batch.frames.rows().into_iter().enumerate() {
        write!(w, "{utt_id},{i}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
