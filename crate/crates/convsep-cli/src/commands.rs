//! Subcommand implementations behind the `convsep` binary.

use crate::config::FileConfig;
use crate::error::{CliError, Result};
use crate::experiment::{corpus_from_dir, run_experiment};
use crate::model_io::{load_model, save_model};
use crate::results::emit_results;
use crate::wav::{load_wav, write_wav};
use clap::Args;
use convsep::autodiff::Tensor;
use convsep::dsp::{stft, Window};
use convsep::metrics::bss_eval;
use convsep::model::{
    forward, make_toy_pattern, train, ModelParams, RnnCell, Variant,
};
use convsep::separation::{separate, InitStrategy, InputParam, MaskSource};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn parse_variant(s: &str) -> Result<Variant> {
    match s {
        "ff" => Ok(Variant::Ff),
        "ccae" => Ok(Variant::Ccae),
        "rcae" => Ok(Variant::Rcae),
        other => Err(CliError::config(format!(
            "unknown variant '{other}' (expected ff, ccae, or rcae)"
        ))),
    }
}

fn parse_cell(s: &str) -> Result<RnnCell> {
    match s {
        "lstm" => Ok(RnnCell::Lstm),
        "vanilla" => Ok(RnnCell::Vanilla),
        other => Err(CliError::config(format!(
            "unknown rnn cell '{other}' (expected lstm or vanilla)"
        ))),
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn write_matrix_csv(path: &Path, rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> Result<()> {
    let mut out = String::new();
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", at(r, c)).expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of clean WAV utterances for one source
    #[arg(long)]
    pub wav_dir: PathBuf,
    /// Output model file
    #[arg(long)]
    pub out: PathBuf,
    /// TOML config supplying stft/model/training sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model family: ff, ccae, or rcae
    #[arg(long)]
    pub variant: Option<String>,
    /// Number of components (decoder filters)
    #[arg(long)]
    pub components: Option<usize>,
    /// Filter depth in frames
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub frame_size: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Weight of the L1 activation penalty
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden size of each recurrent encoder (rcae)
    #[arg(long)]
    pub rnn_hidden: Option<usize>,
    /// Recurrent cell: lstm or vanilla (rcae)
    #[arg(long)]
    pub rnn_cell: Option<String>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_file_config(&args.config)?;
    if let Some(f) = args.frame_size {
        cfg.stft.frame_size = f;
    }
    if let Some(h) = args.hop {
        cfg.stft.hop = h;
    }
    if let Some(i) = args.iterations {
        cfg.training.iterations = i;
    }
    if let Some(lr) = args.learning_rate {
        cfg.training.learning_rate = lr;
    }
    if let Some(s) = args.sparsity {
        cfg.model.sparsity_weight = s;
    }
    if let Some(d) = args.depth {
        cfg.model.conv_depth = d;
    }
    if let Some(h) = args.rnn_hidden {
        cfg.model.rnn_hidden = Some(h);
    }
    if let Some(c) = &args.rnn_cell {
        cfg.model.rnn_cell = parse_cell(c)?;
    }
    cfg.validate_stft()?;

    let variant = match &args.variant {
        Some(v) => parse_variant(v)?,
        None => *cfg.model.variants.first().unwrap_or(&Variant::Ccae),
    };
    let k = args
        .components
        .or_else(|| cfg.model.k_values.first().copied())
        .ok_or_else(|| CliError::config("no component count given"))?;
    let seed = args.seed.unwrap_or(cfg.run.seed);

    let corpus = corpus_from_dir(&args.wav_dir, cfg.stft.frame_size, cfg.stft.hop)?;
    let model_cfg = cfg.model_config(variant, k, seed);
    println!(
        "training {} model: K={k} T={} bins={} on {} utterances, {} iterations",
        variant.as_str(),
        model_cfg.depth(),
        model_cfg.bins,
        corpus.len(),
        model_cfg.train.iterations
    );
    let (model, report) = train(&model_cfg, &corpus).map_err(CliError::from)?;
    if let (Some(first), Some(last)) = (report.trajectory.first(), report.trajectory.last()) {
        println!(
            "loss {:.3} -> {:.3} in {:.1}s",
            first.total(),
            last.total(),
            report.wall_seconds
        );
    }
    let frame = *corpus[0].frame();
    save_model(&model, &frame, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Trained model for source 1
    #[arg(long)]
    pub model1: PathBuf,
    /// Trained model for source 2
    #[arg(long)]
    pub model2: PathBuf,
    /// Mixture WAV file
    #[arg(long)]
    pub mixture: PathBuf,
    /// Output directory for source1.wav, source2.wav, loss.csv
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML config supplying the separation section
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Input initialization: half-mixture or random-positive
    #[arg(long)]
    pub init: Option<String>,
    /// Mask numerators: model-outputs or optimized-inputs
    #[arg(long)]
    pub mask_source: Option<String>,
    /// Input parameterization: softplus-reparam or projected
    #[arg(long)]
    pub parameterization: Option<String>,
}

pub fn cmd_separate(args: &SeparateArgs) -> Result<()> {
    let mut cfg = load_file_config(&args.config)?;
    if let Some(i) = args.iterations {
        cfg.separation.iterations = i;
    }
    if let Some(lr) = args.learning_rate {
        cfg.separation.learning_rate = lr;
    }
    if let Some(init) = &args.init {
        cfg.separation.init = match init.as_str() {
            "half-mixture" => InitStrategy::HalfMixture,
            "random-positive" => InitStrategy::RandomPositive,
            other => {
                return Err(CliError::config(format!(
                    "unknown init strategy '{other}'"
                )))
            }
        };
    }
    if let Some(mask) = &args.mask_source {
        cfg.separation.mask_source = match mask.as_str() {
            "model-outputs" => MaskSource::ModelOutputs,
            "optimized-inputs" => MaskSource::OptimizedInputs,
            other => return Err(CliError::config(format!("unknown mask source '{other}'"))),
        };
    }
    if let Some(p) = &args.parameterization {
        cfg.separation.parameterization = match p.as_str() {
            "softplus-reparam" => InputParam::SoftplusReparam,
            "projected" => InputParam::Projected,
            other => {
                return Err(CliError::config(format!(
                    "unknown parameterization '{other}'"
                )))
            }
        };
    }

    let saved1 = load_model(&args.model1)?;
    let saved2 = load_model(&args.model2)?;
    if saved1.stft.frame_size != saved2.stft.frame_size || saved1.stft.hop != saved2.stft.hop {
        return Err(CliError::config(format!(
            "models disagree on the transform: {}x{} vs {}x{}",
            saved1.stft.frame_size, saved1.stft.hop, saved2.stft.frame_size, saved2.stft.hop
        )));
    }
    let mixture_sig = load_wav(&args.mixture)?;
    if mixture_sig.sample_rate() != saved1.stft.sample_rate {
        eprintln!(
            "warning: mixture sample rate {} differs from the models' training rate {}",
            mixture_sig.sample_rate(),
            saved1.stft.sample_rate
        );
    }
    let mixture = stft(
        &mixture_sig,
        saved1.stft.frame_size,
        saved1.stft.hop,
        Window::Hann,
    )
    .map_err(CliError::from)?;

    let sep_cfg = cfg.separation_config(args.seed.unwrap_or(cfg.run.seed));
    let result =
        separate(&saved1.model, &saved2.model, &mixture, &sep_cfg).map_err(CliError::from)?;

    std::fs::create_dir_all(&args.out_dir)?;
    write_wav(&args.out_dir.join("source1.wav"), &result.signals[0])?;
    write_wav(&args.out_dir.join("source2.wav"), &result.signals[1])?;
    let mut loss_csv = String::from("iteration,kl\n");
    for (i, v) in result.trajectory.iter().enumerate() {
        writeln!(loss_csv, "{i},{v}").expect("string write");
    }
    std::fs::write(args.out_dir.join("loss.csv"), loss_csv)?;
    let echo = serde_json::to_string_pretty(&sep_cfg)
        .map_err(|e| CliError::data(format!("config echo: {e}")))?;
    std::fs::write(args.out_dir.join("separation_config.json"), echo)?;
    println!(
        "separated {} -> {} (loss {:.3} -> {:.3})",
        args.mixture.display(),
        args.out_dir.display(),
        result.trajectory.first().unwrap(),
        result.trajectory.last().unwrap()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Separated estimate WAVs, one per source
    #[arg(long, num_args = 1.., required = true)]
    pub estimates: Vec<PathBuf>,
    /// Reference WAVs in the same order
    #[arg(long, num_args = 1.., required = true)]
    pub references: Vec<PathBuf>,
    /// Optional CSV output path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    if args.estimates.len() != args.references.len() || args.estimates.len() < 2 {
        return Err(CliError::config(
            "need the same number of estimates and references (at least 2)",
        ));
    }
    let estimates: Vec<_> = args
        .estimates
        .iter()
        .map(|p| load_wav(p))
        .collect::<Result<_>>()?;
    let references: Vec<_> = args
        .references
        .iter()
        .map(|p| load_wav(p))
        .collect::<Result<_>>()?;
    let len = estimates
        .iter()
        .chain(&references)
        .map(|s| s.len())
        .min()
        .unwrap();
    let estimates: Vec<_> = estimates
        .iter()
        .map(|s| s.truncated(len).map_err(CliError::from))
        .collect::<Result<_>>()?;
    let references: Vec<_> = references
        .iter()
        .map(|s| s.truncated(len).map_err(CliError::from))
        .collect::<Result<_>>()?;

    let mut csv = String::from("source,sdr_db,sir_db,sar_db\n");
    for (i, est) in estimates.iter().enumerate() {
        let m = bss_eval(est, &references, i).map_err(CliError::from)?;
        println!(
            "source {i}: SDR {:.2} dB  SIR {:.2} dB  SAR {:.2} dB",
            m.sdr, m.sir, m.sar
        );
        writeln!(
            csv,
            "{i},{},{},{}",
            crate::results::cap_db(m.sdr),
            crate::results::cap_db(m.sir),
            crate::results::cap_db(m.sar)
        )
        .expect("string write");
    }
    if let Some(out) = &args.out {
        std::fs::write(out, csv)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML experiment configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Override run.output_dir
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Override run.mixtures
    #[arg(long)]
    pub mixtures: Option<usize>,
    /// Override run.workers
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override run.seed
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let mut cfg = FileConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.run.output_dir = dir.clone();
    }
    if let Some(m) = args.mixtures {
        cfg.run.mixtures = m;
    }
    if let Some(w) = args.workers {
        cfg.run.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }

    let table = run_experiment(&cfg)?;
    std::fs::create_dir_all(&cfg.run.output_dir)?;
    cfg.save(&cfg.run.output_dir.join("effective_config.toml"))?;
    emit_results(&table, &cfg.run.output_dir)?;

    for s in &table.summaries {
        println!(
            "{} K={} {}: median {:.2} dB (q1 {:.2}, q3 {:.2}, n={})",
            s.variant.as_str(),
            s.k,
            s.metric,
            s.stats.median,
            s.stats.q1,
            s.stats.q3,
            s.stats.count
        );
    }
    if !table.manifest.failures.is_empty() {
        eprintln!(
            "{} unit(s) failed; see run_manifest.json",
            table.manifest.failures.len()
        );
    }
    println!("wrote results to {}", cfg.run.output_dir.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ToyDemoArgs {
    /// Output directory for the CSV dumps
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    /// Filter depth in columns
    #[arg(long, default_value_t = 36)]
    pub depth: usize,
    /// Pattern height in rows
    #[arg(long, default_value_t = 40)]
    pub height: usize,
    /// Pattern width in columns
    #[arg(long, default_value_t = 350)]
    pub width: usize,
    /// Stripe repetition period in columns
    #[arg(long, default_value_t = 70)]
    pub period: usize,
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cmd_toy_demo(args: &ToyDemoArgs) -> Result<()> {
    if args.period < 2 {
        return Err(CliError::config("period must be >= 2"));
    }
    let pattern = make_toy_pattern(args.height, args.width, args.period, args.seed);
    let mut cfg = convsep::model::ModelConfig::new(
        Variant::Ccae,
        args.components,
        args.depth,
        args.height,
    );
    cfg.sparsity_weight = args.sparsity;
    cfg.train.iterations = args.iterations;
    cfg.train.optimizer.learning_rate = args.learning_rate;
    cfg.train.seed = args.seed;

    println!(
        "training ccae on {}x{} pattern: K={} filters {}x{}, {} iterations",
        args.height, args.width, args.components, args.height, args.depth, args.iterations
    );
    let (model, report) = train(&cfg, &[pattern.clone()]).map_err(CliError::from)?;
    let (reconstruction, code) = forward(&model, &pattern).map_err(CliError::from)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let vals = pattern.values();
    write_matrix_csv(&args.out_dir.join("pattern.csv"), vals.rows(), vals.cols(), |r, c| {
        vals.at2(r, c)
    })?;
    let rec = reconstruction.values();
    write_matrix_csv(
        &args.out_dir.join("reconstruction.csv"),
        rec.rows(),
        rec.cols(),
        |r, c| rec.at2(r, c),
    )?;
    let h = code.values();
    write_matrix_csv(&args.out_dir.join("activations.csv"), h.rows(), h.cols(), |r, c| {
        h.at2(r, c)
    })?;
    let decoder: &Tensor = match &model.params {
        ModelParams::Ccae { decoder, .. } => decoder,
        _ => unreachable!("toy demo trains a ccae"),
    };
    for i in 0..args.components {
        // One M x T spectro-temporal basis per component.
        write_matrix_csv(
            &args.out_dir.join(format!("filter_{i}.csv")),
            args.height,
            args.depth,
            |f, k| decoder.at3(i, k, f),
        )?;
    }
    let mut loss_csv = String::from("iteration,kl,sparsity\n");
    for (i, terms) in report.trajectory.iter().enumerate() {
        writeln!(loss_csv, "{i},{},{}", terms.kl, terms.sparsity).expect("string write");
    }
    std::fs::write(args.out_dir.join("loss.csv"), loss_csv)?;
    let echo = serde_json::to_string_pretty(&cfg)
        .map_err(|e| CliError::data(format!("config echo: {e}")))?;
    std::fs::write(args.out_dir.join("effective_config.json"), echo)?;

    let first = report.trajectory.first().map(|t| t.kl).unwrap_or(0.0);
    let last = report.trajectory.last().map(|t| t.kl).unwrap_or(0.0);
    println!(
        "kl {first:.1} -> {last:.4} in {:.1}s; wrote CSVs to {}",
        report.wall_seconds,
        args.out_dir.display()
    );
    Ok(())
}
