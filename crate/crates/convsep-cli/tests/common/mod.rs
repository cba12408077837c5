//! Shared synthetic-signal builders for the integration and acceptance
//! tests: harmonic-comb sources with controllable partial sets and
//! temporal envelopes, plus WAV corpus scaffolding.

#![allow(dead_code)]

use convsep::dsp::AudioSignal;
use convsep_cli::wav::write_wav;
use std::path::Path;

pub fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn unit(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 / (1u64 << 53) as f64
}

/// Temporal envelope of a synthetic source.
#[derive(Clone, Copy)]
pub enum Envelope {
    /// Slow sinusoidal amplitude modulation.
    SmoothAm { rate_hz: f64 },
    /// Periodic raised-cosine-squared bumps.
    Pulses { rate_hz: f64 },
}

impl Envelope {
    fn at(&self, t: f64) -> f64 {
        match *self {
            Envelope::SmoothAm { rate_hz } => {
                0.6 + 0.4 * (std::f64::consts::TAU * rate_hz * t).sin()
            }
            Envelope::Pulses { rate_hz } => {
                let b = 0.5 - 0.5 * (std::f64::consts::TAU * (t * rate_hz).fract()).cos();
                b * b
            }
        }
    }
}

/// Sum of sinusoids at (frequency, amplitude) pairs under an envelope, with
/// seed-determined phases.
pub fn comb_source(
    sample_rate: u32,
    duration_s: f64,
    partials: &[(f64, f64)],
    envelope: Envelope,
    seed: u64,
) -> AudioSignal {
    let mut rng = seed.wrapping_mul(1000003).wrapping_add(17);
    let phases: Vec<f64> = (0..partials.len())
        .map(|_| unit(&mut rng) * std::f64::consts::TAU)
        .collect();
    let n = (sample_rate as f64 * duration_s) as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let tone: f64 = partials
                .iter()
                .zip(&phases)
                .map(|((f, a), p)| a * (std::f64::consts::TAU * f * t + p).sin())
                .sum();
            0.08 * envelope.at(t) * tone
        })
        .collect();
    AudioSignal::new(samples, sample_rate).unwrap()
}

/// Disjoint 400 Hz comb grids for the two-source separation check: source 0
/// sits on 200+400k Hz, source 1 on 400+400k Hz.
pub fn disjoint_comb(sample_rate: u32, duration_s: f64, source: usize, seed: u64) -> AudioSignal {
    let offset = if source == 0 { 200.0 } else { 400.0 };
    let partials: Vec<(f64, f64)> = (0..10).map(|k| (offset + 400.0 * k as f64, 1.0)).collect();
    let envelope = if source == 0 {
        Envelope::SmoothAm { rate_hz: 1.3 }
    } else {
        Envelope::Pulses { rate_hz: 3.7 }
    };
    comb_source(sample_rate, duration_s, &partials, envelope, seed)
}

/// Synthetic "speaker" utterance for corpus experiments: six private
/// partials on a speaker-specific 400 Hz grid plus three shared partials
/// whose assignment is only resolvable from the temporal envelope. Per-
/// utterance seeds vary phases, per-partial gains, and the envelope rate.
pub fn speaker_utterance(
    sample_rate: u32,
    duration_s: f64,
    style: usize,
    seed: u64,
) -> AudioSignal {
    let mut rng = seed.wrapping_mul(1000003).wrapping_add(style as u64 * 7919);
    let offset = if style == 0 { 200.0 } else { 400.0 };
    let mut partials: Vec<(f64, f64)> =
        (0..6).map(|k| (offset + 400.0 * k as f64, 1.0)).collect();
    partials.extend([2700.0, 3100.0, 3500.0].iter().map(|&f| (f, 0.8)));
    for p in &mut partials {
        p.1 *= 0.8 + 0.4 * unit(&mut rng);
    }
    let envelope = if style == 0 {
        Envelope::SmoothAm {
            rate_hz: 1.0 + 0.8 * unit(&mut rng),
        }
    } else {
        Envelope::Pulses {
            rate_hz: 3.0 + 2.0 * unit(&mut rng),
        }
    };
    comb_source(sample_rate, duration_s, &partials, envelope, splitmix(&mut rng))
}

/// Writes utterances as `utt_00.wav`, `utt_01.wav`, ... into `dir`.
pub fn write_speaker_dir(dir: &Path, utterances: &[AudioSignal]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, sig) in utterances.iter().enumerate() {
        write_wav(&dir.join(format!("utt_{i:02}.wav")), sig).unwrap();
    }
}

/// Builds a two-speaker corpus on disk and returns the speaker directories.
pub fn build_corpus(
    root: &Path,
    sample_rate: u32,
    duration_s: f64,
    utterances_per_speaker: usize,
    seed: u64,
) -> Vec<std::path::PathBuf> {
    let mut dirs = Vec::new();
    for style in 0..2 {
        let dir = root.join(format!("speaker_{style}"));
        let utts: Vec<AudioSignal> = (0..utterances_per_speaker)
            .map(|u| {
                speaker_utterance(
                    sample_rate,
                    duration_s,
                    style,
                    seed + 1000 * style as u64 + u as u64,
                )
            })
            .collect();
        write_speaker_dir(&dir, &utts);
        dirs.push(dir);
    }
    dirs
}
