//! Structured run configuration: one TOML file with sections for corpus,
//! transform, model, training, separation, and run control. Subcommands read
//! the sections they need; command-line flags override file values.

use crate::error::{CliError, Result};
use convsep::autodiff::RmsPropConfig;
use convsep::model::{ModelConfig, RnnCell, TrainConfig, Variant};
use convsep::separation::{InitStrategy, InputParam, MaskSource, SeparationConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: CorpusSection,
    pub stft: StftSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub separation: SeparationSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// One directory of WAV utterances per speaker.
    pub speakers: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StftSection {
    pub frame_size: usize,
    pub hop: usize,
}

impl Default for StftSection {
    fn default() -> Self {
        StftSection {
            frame_size: 1024,
            hop: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variants: Vec<Variant>,
    pub k_values: Vec<usize>,
    pub conv_depth: usize,
    /// Hidden size of each recurrent encoder; defaults to K when absent.
    pub rnn_hidden: Option<usize>,
    pub rnn_cell: RnnCell,
    pub sparsity_weight: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            variants: vec![Variant::Ccae],
            k_values: vec![20],
            conv_depth: 8,
            rnn_hidden: None,
            rnn_cell: RnnCell::Lstm,
            sparsity_weight: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            iterations: 2000,
            learning_rate: 0.001,
            momentum: 0.7,
            decay: 0.9,
            epsilon: 1e-8,
            clip_norm: 100.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationSection {
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub parameterization: InputParam,
    pub init: InitStrategy,
    pub mask_source: MaskSource,
}

impl Default for SeparationSection {
    fn default() -> Self {
        SeparationSection {
            iterations: 500,
            learning_rate: 0.001,
            momentum: 0.7,
            decay: 0.9,
            epsilon: 1e-8,
            clip_norm: 100.0,
            parameterization: InputParam::SoftplusReparam,
            init: InitStrategy::HalfMixture,
            mask_source: MaskSource::ModelOutputs,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mixtures: usize,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mixtures: 20,
            seed: 42,
            workers: 1,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn clip_option(clip_norm: f64) -> Option<f64> {
    if clip_norm > 0.0 {
        Some(clip_norm)
    } else {
        None
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("config serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate_stft(&self) -> Result<()> {
        let s = &self.stft;
        if s.frame_size < 2 || s.frame_size % 2 != 0 {
            return Err(CliError::config(format!(
                "stft.frame_size must be even and >= 2, got {}",
                s.frame_size
            )));
        }
        if s.hop == 0 || s.hop > s.frame_size {
            return Err(CliError::config(format!(
                "stft.hop must be in 1..={}, got {}",
                s.frame_size, s.hop
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.stft.frame_size / 2 + 1
    }

    /// Model configuration for one (variant, K) point. The training seed is
    /// set by the caller.
    pub fn model_config(&self, variant: Variant, k: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            variant,
            num_components: k,
            conv_depth: self.model.conv_depth,
            bins: self.bins(),
            rnn_hidden: self.model.rnn_hidden.unwrap_or(k),
            rnn_cell: self.model.rnn_cell,
            sparsity_weight: self.model.sparsity_weight,
            train: TrainConfig {
                iterations: self.training.iterations,
                optimizer: RmsPropConfig {
                    learning_rate: self.training.learning_rate,
                    momentum: self.training.momentum,
                    decay: self.training.decay,
                    epsilon: self.training.epsilon,
                },
                seed,
                clip_norm: clip_option(self.training.clip_norm),
            },
        }
    }

    pub fn separation_config(&self, seed: u64) -> SeparationConfig {
        SeparationConfig {
            iterations: self.separation.iterations,
            optimizer: RmsPropConfig {
                learning_rate: self.separation.learning_rate,
                momentum: self.separation.momentum,
                decay: self.separation.decay,
                epsilon: self.separation.epsilon,
            },
            parameterization: self.separation.parameterization,
            init: self.separation.init,
            mask_source: self.separation.mask_source,
            seed,
            clip_norm: clip_option(self.separation.clip_norm),
        }
    }
}
