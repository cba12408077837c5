//! The three autoencoder families over magnitude spectrograms: feed-forward,
//! CNN-CNN (CCAE), and recurrent-convolutional (RCAE), plus generative
//! training against the KL reconstruction objective with an optional L1
//! activation penalty.

pub(crate) mod build;
mod toy;
mod train;

pub use toy::make_toy_pattern;
pub use train::{evaluate_loss, loss_gradients, train, LossTerms, TrainReport};

use crate::autodiff::{kl_divergence, xavier_uniform, RmsPropConfig, Tensor};
use crate::dsp::{FrameSpec, MagnitudeSpectrogram};
use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain matrix encoder/decoder (no temporal context).
    Ff,
    /// Convolutional encoder and decoder.
    Ccae,
    /// Per-component recurrent encoders, convolutional decoder.
    Rcae,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Ff => "ff",
            Variant::Ccae => "ccae",
            Variant::Rcae => "rcae",
        }
    }
}

/// Recurrent cell used by the RCAE encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RnnCell {
    Lstm,
    Vanilla,
}

/// Gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub optimizer: RmsPropConfig,
    pub seed: u64,
    /// Global L2 gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            optimizer: RmsPropConfig::default(),
            seed: 0,
            clip_norm: Some(100.0),
        }
    }
}

/// Everything needed to build and train one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Number of components / decoder filters (K).
    pub num_components: usize,
    /// Temporal depth of the convolution filters in frames (T).
    pub conv_depth: usize,
    /// Input height in frequency bins (M).
    pub bins: usize,
    /// Hidden state size of each recurrent encoder (RCAE only).
    pub rnn_hidden: usize,
    pub rnn_cell: RnnCell,
    /// Weight of the L1 penalty on the activation code.
    pub sparsity_weight: f64,
    pub train: TrainConfig,
}

impl ModelConfig {
    pub fn new(variant: Variant, num_components: usize, conv_depth: usize, bins: usize) -> Self {
        ModelConfig {
            variant,
            num_components,
            conv_depth,
            bins,
            rnn_hidden: num_components,
            rnn_cell: RnnCell::Lstm,
            sparsity_weight: 1e-4,
            train: TrainConfig::default(),
        }
    }

    /// Filter depth actually used: the feed-forward variant has none.
    pub fn depth(&self) -> usize {
        match self.variant {
            Variant::Ff => 1,
            _ => self.conv_depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::invalid("num_components must be >= 1"));
        }
        if self.conv_depth == 0 {
            return Err(Error::invalid("conv_depth must be >= 1"));
        }
        if self.bins == 0 {
            return Err(Error::invalid("bins must be >= 1"));
        }
        if self.sparsity_weight < 0.0 {
            return Err(Error::invalid("sparsity_weight must be >= 0"));
        }
        if self.variant == Variant::Rcae && self.rnn_hidden == 0 {
            return Err(Error::invalid("rnn_hidden must be >= 1 for rcae"));
        }
        Ok(())
    }
}

/// One LSTM gate: recurrent map, input projection, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub recurrent: Tensor,
    pub project: Tensor,
    pub bias: Tensor,
}

/// LSTM weights in gate order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub gates: [GateParams; 4],
}

/// Weights of one recurrent encoder component.
#[derive(Debug, Clone, PartialEq)]
pub enum CellParams {
    Lstm(LstmParams),
    /// Bias-free tanh recursion.
    Vanilla { recurrent: Tensor, project: Tensor },
}

/// Learnable weights of one model variant.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Ff { encoder: Tensor, decoder: Tensor },
    Ccae { encoder: Tensor, decoder: Tensor },
    Rcae { cells: Vec<CellParams>, decoder: Tensor },
}

const GATE_NAMES: [&str; 4] = ["input", "forget", "cell", "output"];

impl ModelParams {
    /// Xavier-initialized parameters for `config`, drawn from `rng`. The
    /// LSTM forget-gate bias starts at 1 so early training keeps state.
    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
        config.validate()?;
        let (k, m, t) = (config.num_components, config.bins, config.depth());
        Ok(match config.variant {
            Variant::Ff => ModelParams::Ff {
                encoder: xavier_uniform(&[k, m], m, k, rng),
                decoder: xavier_uniform(&[m, k], k, m, rng),
            },
            Variant::Ccae => ModelParams::Ccae {
                encoder: xavier_uniform(&[k, m, t], m * t, k * t, rng),
                decoder: xavier_uniform(&[k, t, m], k * t, m * t, rng),
            },
            Variant::Rcae => {
                let h = config.rnn_hidden;
                let cells = (0..k)
                    .map(|_| match config.rnn_cell {
                        RnnCell::Lstm => {
                            let gates = [0, 1, 2, 3].map(|gate| GateParams {
                                recurrent: xavier_uniform(&[h, h], h, h, rng),
                                project: xavier_uniform(&[h, m], m, h, rng),
                                bias: Tensor::filled(&[h, 1], if gate == 1 { 1.0 } else { 0.0 }),
                            });
                            CellParams::Lstm(LstmParams { gates })
                        }
                        RnnCell::Vanilla => CellParams::Vanilla {
                            recurrent: xavier_uniform(&[h, h], h, h, rng),
                            project: xavier_uniform(&[h, m], m, h, rng),
                        },
                    })
                    .collect();
                ModelParams::Rcae {
                    cells,
                    decoder: xavier_uniform(&[k, t, m], k * t, m * t, rng),
                }
            }
        })
    }

    /// Zero-valued parameters with the shapes `config` dictates. Useful as
    /// a deserialization skeleton.
    pub fn zeros(config: &ModelConfig) -> Result<ModelParams> {
        config.validate()?;
        let (k, m, t) = (config.num_components, config.bins, config.depth());
        Ok(match config.variant {
            Variant::Ff => ModelParams::Ff {
                encoder: Tensor::zeros(&[k, m]),
                decoder: Tensor::zeros(&[m, k]),
            },
            Variant::Ccae => ModelParams::Ccae {
                encoder: Tensor::zeros(&[k, m, t]),
                decoder: Tensor::zeros(&[k, t, m]),
            },
            Variant::Rcae => {
                let h = config.rnn_hidden;
                let cells = (0..k)
                    .map(|_| match config.rnn_cell {
                        RnnCell::Lstm => CellParams::Lstm(LstmParams {
                            gates: [(); 4].map(|_| GateParams {
                                recurrent: Tensor::zeros(&[h, h]),
                                project: Tensor::zeros(&[h, m]),
                                bias: Tensor::zeros(&[h, 1]),
                            }),
                        }),
                        RnnCell::Vanilla => CellParams::Vanilla {
                            recurrent: Tensor::zeros(&[h, h]),
                            project: Tensor::zeros(&[h, m]),
                        },
                    })
                    .collect();
                ModelParams::Rcae {
                    cells,
                    decoder: Tensor::zeros(&[k, t, m]),
                }
            }
        })
    }

    /// All parameter tensors in a fixed order (cells first, decoder last).
    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            ModelParams::Ff { encoder, decoder } | ModelParams::Ccae { encoder, decoder } => {
                vec![encoder, decoder]
            }
            ModelParams::Rcae { cells, decoder } => {
                let mut out = Vec::new();
                for cell in cells {
                    match cell {
                        CellParams::Lstm(lstm) => {
                            for gate in &lstm.gates {
                                out.push(&gate.recurrent);
                                out.push(&gate.project);
                                out.push(&gate.bias);
                            }
                        }
                        CellParams::Vanilla { recurrent, project } => {
                            out.push(recurrent);
                            out.push(project);
                        }
                    }
                }
                out.push(decoder);
                out
            }
        }
    }

    /// Mutable view in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            ModelParams::Ff { encoder, decoder } | ModelParams::Ccae { encoder, decoder } => {
                vec![encoder, decoder]
            }
            ModelParams::Rcae { cells, decoder } => {
                let mut out = Vec::new();
                for cell in cells.iter_mut() {
                    match cell {
                        CellParams::Lstm(lstm) => {
                            for gate in lstm.gates.iter_mut() {
                                out.push(&mut gate.recurrent);
                                out.push(&mut gate.project);
                                out.push(&mut gate.bias);
                            }
                        }
                        CellParams::Vanilla { recurrent, project } => {
                            out.push(recurrent);
                            out.push(project);
                        }
                    }
                }
                out.push(decoder);
                out
            }
        }
    }

    /// Stable tensor names matching the [`ModelParams::tensors`] order.
    pub fn tensor_names(&self) -> Vec<String> {
        match self {
            ModelParams::Ff { .. } | ModelParams::Ccae { .. } => {
                vec!["encoder".to_string(), "decoder".to_string()]
            }
            ModelParams::Rcae { cells, .. } => {
                let mut out = Vec::new();
                for (k, cell) in cells.iter().enumerate() {
                    match cell {
                        CellParams::Lstm(_) => {
                            for gate in GATE_NAMES {
                                for part in ["recurrent", "project", "bias"] {
                                    out.push(format!("cell{k}.{gate}.{part}"));
                                }
                            }
                        }
                        CellParams::Vanilla { .. } => {
                            out.push(format!("cell{k}.recurrent"));
                            out.push(format!("cell{k}.project"));
                        }
                    }
                }
                out.push("decoder".to_string());
                out
            }
        }
    }
}

/// Non-negative latent activations, one row per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCode {
    values: Tensor,
    frame: FrameSpec,
}

impl ActivationCode {
    pub fn new(values: Tensor, frame: FrameSpec) -> Result<ActivationCode> {
        if !values.is_matrix() {
            return Err(Error::shape("activation code must be rank 2".to_string()));
        }
        values.ensure_finite("activation code")?;
        if values.data().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("activation code has negative entries"));
        }
        Ok(ActivationCode { values, frame })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }
}

/// A configuration and its trained (or initialized) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    /// Fresh model with Xavier-initialized weights drawn from the config seed.
    pub fn init(config: ModelConfig) -> Result<Model> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let params = ModelParams::init(&config, &mut rng)?;
        Ok(Model { config, params })
    }
}

/// Runs the encoder: the latent code of `x` under `model`.
pub fn encode(model: &Model, x: &MagnitudeSpectrogram) -> Result<ActivationCode> {
    if x.bins() != model.config.bins {
        return Err(Error::shape(format!(
            "encode: input has {} bins, model expects {}",
            x.bins(),
            model.config.bins
        )));
    }
    let mut g = crate::autodiff::Graph::new();
    let ids = build::add_params(&mut g, &model.params, false)?;
    let input = g.constant(x.values().clone())?;
    let code = build::encode_nodes(&mut g, &model.config, &ids, input)?;
    ActivationCode::new(g.value(code).clone(), *x.frame())
}

/// Runs the decoder: the strictly positive reconstruction of a code.
pub fn decode(model: &Model, code: &ActivationCode) -> Result<MagnitudeSpectrogram> {
    if code.values().rows() != model.config.num_components {
        return Err(Error::shape(format!(
            "decode: code has {} rows, model expects {}",
            code.values().rows(),
            model.config.num_components
        )));
    }
    let mut g = crate::autodiff::Graph::new();
    let ids = build::add_params(&mut g, &model.params, false)?;
    let code_node = g.constant(code.values().clone())?;
    let output = build::decode_nodes(&mut g, &model.config, &ids, code_node)?;
    MagnitudeSpectrogram::new(g.value(output).clone(), *code.frame())
}

/// Full autoencoder pass; returns the reconstruction and the code.
pub fn forward(
    model: &Model,
    x: &MagnitudeSpectrogram,
) -> Result<(MagnitudeSpectrogram, ActivationCode)> {
    let code = encode(model, x)?;
    let xhat = decode(model, &code)?;
    Ok((xhat, code))
}

/// Training objective: generalized KL divergence plus the weighted L1 norm
/// of the activations.
pub fn loss(
    x: &MagnitudeSpectrogram,
    xhat: &MagnitudeSpectrogram,
    code: &ActivationCode,
    sparsity_weight: f64,
) -> Result<f64> {
    let kl = kl_divergence(x.values(), xhat.values())?;
    let l1: f64 = code.values().data().iter().map(|v| v.abs()).sum();
    Ok(kl + sparsity_weight * l1)
}
