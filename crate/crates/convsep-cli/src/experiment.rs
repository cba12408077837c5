//! Experiment orchestration: for every mixture id, hold one utterance out
//! per speaker, train one model per speaker on the rest, mix the holdouts at
//! 0 dB, separate, and score both outputs against the exact mixture
//! summands. Units run independently over a configurable worker pool; all
//! randomness is derived from the base seed, so results are reproducible
//! regardless of scheduling.

use crate::config::FileConfig;
use crate::error::{CliError, Result};
use crate::mix::mix_at_0db;
use crate::results::{
    cap_db, compute_summaries, ResultRow, ResultsTable, RunManifest, UnitFailure, UnitRecord,
};
use crate::wav::load_wav;
use convsep::dsp::{split, stft, AudioSignal, MagnitudeSpectrogram, Window};
use convsep::metrics::bss_eval;
use convsep::model::{train, Model, Variant};
use convsep::separation::separate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

const EXPECTED_SAMPLE_RATE: u32 = 16_000;

/// Deterministic seed derivation: mixes salts into a base seed.
pub fn mix_seed(base: u64, salts: &[u64]) -> u64 {
    let mut state = base;
    for &salt in salts {
        state = state
            .wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15))
            .wrapping_add(0x2545f4914f6cdd1d);
        state = (state ^ (state >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        state = (state ^ (state >> 27)).wrapping_mul(0x94d049bb133111eb);
        state ^= state >> 31;
    }
    state
}

fn variant_salt(v: Variant) -> u64 {
    match v {
        Variant::Ff => 1,
        Variant::Ccae => 2,
        Variant::Rcae => 3,
    }
}

struct Speaker {
    name: String,
    utterances: Vec<AudioSignal>,
}

fn load_speakers(cfg: &FileConfig) -> Result<Vec<Speaker>> {
    if cfg.corpus.speakers.len() < 2 {
        return Err(CliError::config(
            "corpus.speakers must list at least 2 directories",
        ));
    }
    let mut speakers = Vec::new();
    for dir in &cfg.corpus.speakers {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .map(|e| e.eq_ignore_ascii_case("wav"))
                    .unwrap_or(false)
            })
            .collect();
        paths.sort(); // stable utterance indexing
        if paths.len() < 2 {
            return Err(CliError::data(format!(
                "speaker {} has {} wav files, need at least 2 (one holdout plus training data)",
                name,
                paths.len()
            )));
        }
        let utterances: Vec<AudioSignal> =
            paths.iter().map(|p| load_wav(p)).collect::<Result<_>>()?;
        for (u, path) in utterances.iter().zip(&paths) {
            if u.sample_rate() != EXPECTED_SAMPLE_RATE {
                eprintln!(
                    "warning: {} has sample rate {} (expected {EXPECTED_SAMPLE_RATE}); using it unresampled",
                    path.display(),
                    u.sample_rate()
                );
            }
        }
        speakers.push(Speaker { name, utterances });
    }
    Ok(speakers)
}

/// Speaker pair and holdout utterances for one mixture id, drawn from a
/// seed derived only from the base seed and the mixture id.
struct MixtureDraw {
    speakers: [usize; 2],
    holdout: [usize; 2],
}

fn draw_mixture(base_seed: u64, mixture_id: usize, speakers: &[Speaker]) -> MixtureDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(base_seed, &[0x6d69, mixture_id as u64]));
    let a = rng.gen_range(0..speakers.len());
    let mut b = rng.gen_range(0..speakers.len() - 1);
    if b >= a {
        b += 1;
    }
    let hold_a = rng.gen_range(0..speakers[a].utterances.len());
    let hold_b = rng.gen_range(0..speakers[b].utterances.len());
    MixtureDraw {
        speakers: [a, b],
        holdout: [hold_a, hold_b],
    }
}

struct Unit {
    mixture_id: usize,
    variant: Variant,
    k: usize,
    speakers: [usize; 2],
    holdout: [usize; 2],
    train_seeds: [u64; 2],
    separation_seed: u64,
}

fn training_corpus(
    speaker: &Speaker,
    holdout: usize,
    frame_size: usize,
    hop: usize,
) -> Result<Vec<MagnitudeSpectrogram>> {
    speaker
        .utterances
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != holdout)
        .map(|(_, sig)| {
            let spec = stft(sig, frame_size, hop, Window::Hann)?;
            Ok(split(&spec).0)
        })
        .collect::<convsep::Result<_>>()
        .map_err(CliError::from)
}

fn run_unit(cfg: &FileConfig, speakers: &[Speaker], unit: &Unit) -> Result<Vec<ResultRow>> {
    let (frame_size, hop) = (cfg.stft.frame_size, cfg.stft.hop);

    let mut models: Vec<Model> = Vec::with_capacity(2);
    for side in 0..2 {
        let corpus = training_corpus(
            &speakers[unit.speakers[side]],
            unit.holdout[side],
            frame_size,
            hop,
        )?;
        let model_cfg = cfg.model_config(unit.variant, unit.k, unit.train_seeds[side]);
        let (model, _) = train(&model_cfg, &corpus).map_err(CliError::from)?;
        models.push(model);
    }

    let hold_a = &speakers[unit.speakers[0]].utterances[unit.holdout[0]];
    let hold_b = &speakers[unit.speakers[1]].utterances[unit.holdout[1]];
    let (mixture_sig, truth_a, truth_b) = mix_at_0db(hold_a, hold_b)?;
    let mixture = stft(&mixture_sig, frame_size, hop, Window::Hann).map_err(CliError::from)?;

    let sep_cfg = cfg.separation_config(unit.separation_seed);
    let result = separate(&models[0], &models[1], &mixture, &sep_cfg).map_err(CliError::from)?;

    let out_len = result.signals[0].len();
    let targets = vec![
        truth_a.truncated(out_len).map_err(CliError::from)?,
        truth_b.truncated(out_len).map_err(CliError::from)?,
    ];
    let mut rows = Vec::with_capacity(2);
    for source in 0..2 {
        let metrics = bss_eval(&result.signals[source], &targets, source).map_err(CliError::from)?;
        rows.push(ResultRow {
            mixture_id: unit.mixture_id,
            variant: unit.variant,
            k: unit.k,
            source,
            sdr: cap_db(metrics.sdr),
            sir: cap_db(metrics.sir),
            sar: cap_db(metrics.sar),
        });
    }
    Ok(rows)
}

/// Runs the full experiment described by `cfg` and returns the populated
/// results table (rows, summaries, manifest). Failed units are recorded in
/// the manifest and the experiment continues.
pub fn run_experiment(cfg: &FileConfig) -> Result<ResultsTable> {
    cfg.validate_stft()?;
    if cfg.model.k_values.is_empty() {
        return Err(CliError::config("model.k_values must be non-empty"));
    }
    if cfg.model.variants.is_empty() {
        return Err(CliError::config("model.variants must be non-empty"));
    }
    if cfg.run.mixtures == 0 {
        return Err(CliError::config("run.mixtures must be >= 1"));
    }
    let started = Instant::now();
    let speakers = load_speakers(cfg)?;
    let base_seed = cfg.run.seed;

    let mut units = Vec::new();
    for mixture_id in 0..cfg.run.mixtures {
        let draw = draw_mixture(base_seed, mixture_id, &speakers);
        for &variant in &cfg.model.variants {
            for &k in &cfg.model.k_values {
                let salt = [variant_salt(variant), k as u64, mixture_id as u64];
                units.push(Unit {
                    mixture_id,
                    variant,
                    k,
                    speakers: draw.speakers,
                    holdout: draw.holdout,
                    train_seeds: [
                        mix_seed(base_seed, &[1, salt[0], salt[1], salt[2]]),
                        mix_seed(base_seed, &[2, salt[0], salt[1], salt[2]]),
                    ],
                    separation_seed: mix_seed(base_seed, &[3, salt[0], salt[1], salt[2]]),
                });
            }
        }
    }

    let workers = cfg.run.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    // Order-preserving map keeps the output independent of scheduling.
    let outcomes: Vec<(std::result::Result<Vec<ResultRow>, String>, f64)> = pool.install(|| {
        units
            .par_iter()
            .map(|unit| {
                let t0 = Instant::now();
                let out = run_unit(cfg, &speakers, unit).map_err(|e| e.to_string());
                (out, t0.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut unit_records = Vec::new();
    for (unit, (outcome, wall)) in units.iter().zip(outcomes) {
        unit_records.push(UnitRecord {
            mixture_id: unit.mixture_id,
            variant: unit.variant,
            k: unit.k,
            speakers: [
                speakers[unit.speakers[0]].name.clone(),
                speakers[unit.speakers[1]].name.clone(),
            ],
            holdout: unit.holdout,
            train_seeds: unit.train_seeds,
            separation_seed: unit.separation_seed,
            wall_seconds: wall,
        });
        match outcome {
            Ok(mut unit_rows) => rows.append(&mut unit_rows),
            Err(error) => failures.push(UnitFailure {
                mixture_id: unit.mixture_id,
                variant: unit.variant,
                k: unit.k,
                error,
            }),
        }
    }
    if rows.is_empty() {
        let detail = failures
            .first()
            .map(|f| f.error.clone())
            .unwrap_or_default();
        return Err(CliError::Numerical(format!(
            "every experiment unit failed; first error: {detail}"
        )));
    }

    let summaries = compute_summaries(&rows);
    Ok(ResultsTable {
        rows,
        summaries,
        manifest: RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            base_seed,
            config: cfg.clone(),
            units: unit_records,
            failures,
            wall_seconds_total: started.elapsed().as_secs_f64(),
        },
    })
}

/// Loads every wav in a directory as a training corpus of spectrograms.
pub fn corpus_from_dir(
    dir: &Path,
    frame_size: usize,
    hop: usize,
) -> Result<Vec<MagnitudeSpectrogram>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!(
            "no wav files in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let sig = load_wav(p)?;
            let spec = stft(&sig, frame_size, hop, Window::Hann).map_err(CliError::from)?;
            Ok(split(&spec).0)
        })
        .collect()
}
