//! Deterministic synthetic corpora for demos, tests, and desk-scale
//! experiments: pure tones, frequency-patterned chirps with regime
//! switches, and a ten-class two-formant "spoken digit" stand-in.
//!
//! Every utterance is rendered from a per-class frequency trajectory with
//! per-utterance jitter (duration, pitch, segment boundaries, noise) and a
//! synthetic speaker factor, then padded with near-silence so the endpoint
//! detector has something to remove. All draws come from one seeded stream,
//! so a corpus is a pure function of its parameters.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::signal::{write_wav, AudioSignal};

/// One synthesis recipe: simultaneous frequency tracks, each a piecewise
/// linear trajectory through its control points.
#[derive(Debug, Clone)]
struct Pattern {
    tracks: Vec<Vec<f64>>,
}

fn render(
    pattern: &Pattern,
    samples: usize,
    sample_rate: f64,
    pitch_factor: f64,
    boundary_jitter: f64,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut out = vec![0.0; samples];
    let track_gain = 1.0 / pattern.tracks.len() as f64;
    for track in &pattern.tracks {
        // Jittered segment boundaries over [0, 1].
        let segs = track.len() - 1;
        let mut bounds = vec![0.0; segs + 1];
        for (i, b) in bounds.iter_mut().enumerate().take(segs).skip(1) {
            let nominal = i as f64 / segs as f64;
            *b = (nominal + rng.gen_range(-boundary_jitter..boundary_jitter))
                .clamp(0.05, 0.95);
        }
        bounds[segs] = 1.0;
        let mut phase = rng.gen_range(0.0..2.0 * PI);
        for (n, slot) in out.iter_mut().enumerate() {
            let t = n as f64 / samples as f64;
            let mut seg = 0;
            while seg + 1 < segs && t >= bounds[seg + 1] {
                seg += 1;
            }
            let span = (bounds[seg + 1] - bounds[seg]).max(1e-9);
            let local = ((t - bounds[seg]) / span).clamp(0.0, 1.0);
            let freq = pitch_factor * (track[seg] + (track[seg + 1] - track[seg]) * local);
            phase += 2.0 * PI * freq / sample_rate;
            // Fundamental plus a soft second harmonic for timbre.
            *slot += track_gain * (phase.sin() + 0.3 * (2.0 * phase).sin());
        }
    }
    // Attack/release envelope so trims are non-trivial but stable.
    let ramp = (samples / 16).max(1);
    for n in 0..samples {
        let env = ((n as f64 + 1.0) / ramp as f64)
            .min((samples - n) as f64 / ramp as f64)
            .min(1.0);
        out[n] = 0.85 * env * out[n] + noise * rng.gen_range(-1.0..1.0);
    }
    out
}

fn padded_utterance(
    pattern: &Pattern,
    sample_rate: u32,
    base_samples: usize,
    speakers: usize,
    label: u32,
    index: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> AudioSignal {
    let speaker = index % speakers;
    let pitch = 0.88 + 0.04 * speaker as f64 + rng.gen_range(-0.015..0.015);
    let samples = (base_samples as f64 * rng.gen_range(0.85..1.15)) as usize;
    let body = render(
        pattern,
        samples,
        sample_rate as f64,
        pitch,
        0.06,
        noise,
        rng,
    );
    let pad_lo = rng.gen_range(sample_rate as usize / 50..sample_rate as usize / 12);
    let pad_hi = rng.gen_range(sample_rate as usize / 50..sample_rate as usize / 12);
    let mut out = Vec::with_capacity(pad_lo + body.len() + pad_hi);
    for _ in 0..pad_lo {
        out.push(0.002 * rng.gen_range(-1.0..1.0));
    }
    out.extend(body);
    for _ in 0..pad_hi {
        out.push(0.002 * rng.gen_range(-1.0..1.0));
    }
    AudioSignal {
        samples: out,
        sample_rate,
        label: Some(label),
        speaker_id: Some(format!("s{speaker:02}")),
        utterance_id: format!("{label}_s{speaker:02}_{index:03}"),
    }
}

/// Pure tones at class-distinct frequencies; the smallest useful corpus.
pub fn tone_corpus(classes: usize, per_class: usize, seed: u64) -> Vec<AudioSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_rate = 2000;
    let mut out = Vec::with_capacity(classes * per_class);
    for label in 0..classes {
        let freq = 220.0 + 170.0 * label as f64;
        let pattern = Pattern {
            tracks: vec![vec![freq, freq]],
        };
        for index in 0..per_class {
            out.push(padded_utterance(
                &pattern,
                sample_rate,
                500,
                4,
                label as u32,
                index,
                0.01,
                &mut rng,
            ));
        }
    }
    out
}

/// Four classes of chirps with regime switches: each class follows its own
/// sequence of rising/falling/holding frequency regimes.
pub fn chirp_corpus(per_class: usize, seed: u64) -> Vec<AudioSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_rate = 2000;
    let patterns = [
        Pattern {
            tracks: vec![vec![250.0, 650.0, 650.0, 250.0]],
        },
        Pattern {
            tracks: vec![vec![650.0, 250.0, 250.0, 650.0]],
        },
        Pattern {
            tracks: vec![vec![250.0, 250.0, 650.0, 650.0]],
        },
        Pattern {
            tracks: vec![vec![650.0, 650.0, 250.0, 250.0]],
        },
    ];
    let mut out = Vec::with_capacity(4 * per_class);
    for (label, pattern) in patterns.iter().enumerate() {
        for index in 0..per_class {
            out.push(padded_utterance(
                pattern,
                sample_rate,
                800,
                8,
                label as u32,
                index,
                0.02,
                &mut rng,
            ));
        }
    }
    out
}

/// Ten classes of two-formant words, a desk-scale stand-in for a spoken
/// digit corpus. Classes differ in the joint trajectory of both formants.
pub fn digit_corpus(per_class: usize, seed: u64) -> Vec<AudioSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_rate = 4000;
    let p = |f1: &[f64], f2: &[f64]| Pattern {
        tracks: vec![f1.to_vec(), f2.to_vec()],
    };
    let patterns = [
        p(&[300.0, 300.0, 300.0], &[900.0, 1500.0, 900.0]),
        p(&[250.0, 450.0, 250.0], &[1600.0, 1000.0, 1600.0]),
        p(&[400.0, 250.0, 400.0], &[1100.0, 1100.0, 1700.0]),
        p(&[300.0, 500.0, 500.0], &[1700.0, 1700.0, 1000.0]),
        p(&[500.0, 300.0, 300.0], &[1000.0, 1600.0, 1600.0]),
        p(&[350.0, 350.0, 550.0], &[1300.0, 900.0, 900.0]),
        p(&[550.0, 350.0, 550.0], &[900.0, 1300.0, 1300.0]),
        p(&[300.0, 400.0, 500.0], &[1500.0, 1200.0, 900.0]),
        p(&[500.0, 400.0, 300.0], &[900.0, 1200.0, 1500.0]),
        p(&[400.0, 550.0, 400.0], &[1400.0, 1400.0, 800.0]),
    ];
    let mut out = Vec::with_capacity(10 * per_class);
    for (label, pattern) in patterns.iter().enumerate() {
        for index in 0..per_class {
            out.push(padded_utterance(
                pattern,
                sample_rate,
                1200,
                6,
                label as u32,
                index,
                0.02,
                &mut rng,
            ));
        }
    }
    out
}

/// Writes a corpus as `<label>_<speaker>_<index>.wav` files.
pub fn write_corpus_wavs(dir: &Path, signals: &[AudioSignal]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for sig in signals {
        write_wav(
            &dir.join(format!("{}.wav", sig.utterance_id)),
            &sig.samples,
            sig.sample_rate,
        )?;
    }
    Ok(())
}
