//! Graph construction for the model variants. The input node is supplied by
//! the caller, so the same builders serve training (constant input) and
//! separation (optimizable input).

use super::{CellParams, ModelConfig, ModelParams, Variant};
use crate::autodiff::{lstm_cell_step, Graph, LstmGateIds, LstmIds, NodeId, Tensor};
use crate::error::{Error, Result};

pub(crate) enum CellIds {
    Lstm(LstmIds),
    Vanilla { recurrent: NodeId, project: NodeId },
}

pub(crate) enum ParamIds {
    Dense { encoder: NodeId, decoder: NodeId },
    Recurrent { cells: Vec<CellIds>, decoder: NodeId },
}

impl ParamIds {
    /// Node ids in [`ModelParams::tensors`] order.
    pub(crate) fn flat(&self) -> Vec<NodeId> {
        match self {
            ParamIds::Dense { encoder, decoder } => vec![*encoder, *decoder],
            ParamIds::Recurrent { cells, decoder } => {
                let mut out = Vec::new();
                for cell in cells {
                    match cell {
                        CellIds::Lstm(ids) => {
                            for gate in &ids.gates {
                                out.push(gate.recurrent);
                                out.push(gate.project);
                                out.push(gate.bias);
                            }
                        }
                        CellIds::Vanilla { recurrent, project } => {
                            out.push(*recurrent);
                            out.push(*project);
                        }
                    }
                }
                out.push(*decoder);
                out
            }
        }
    }
}

/// Adds all parameter tensors as leaves, trainable or frozen.
pub(crate) fn add_params(g: &mut Graph, params: &ModelParams, trainable: bool) -> Result<ParamIds> {
    let leaf = |g: &mut Graph, t: &Tensor| -> Result<NodeId> {
        if trainable {
            g.param(t.clone())
        } else {
            g.constant(t.clone())
        }
    };
    Ok(match params {
        ModelParams::Ff { encoder, decoder } | ModelParams::Ccae { encoder, decoder } => {
            ParamIds::Dense {
                encoder: leaf(g, encoder)?,
                decoder: leaf(g, decoder)?,
            }
        }
        ModelParams::Rcae { cells, decoder } => {
            let mut cell_ids = Vec::with_capacity(cells.len());
            for cell in cells {
                cell_ids.push(match cell {
                    CellParams::Lstm(lstm) => {
                        let mut gates = Vec::with_capacity(4);
                        for gate in &lstm.gates {
                            gates.push(LstmGateIds {
                                recurrent: leaf(g, &gate.recurrent)?,
                                project: leaf(g, &gate.project)?,
                                bias: leaf(g, &gate.bias)?,
                            });
                        }
                        CellIds::Lstm(LstmIds {
                            gates: [gates[0], gates[1], gates[2], gates[3]],
                        })
                    }
                    CellParams::Vanilla { recurrent, project } => CellIds::Vanilla {
                        recurrent: leaf(g, recurrent)?,
                        project: leaf(g, project)?,
                    },
                });
            }
            ParamIds::Recurrent {
                cells: cell_ids,
                decoder: leaf(g, decoder)?,
            }
        }
    })
}

/// Builds the encoder on top of `input` and returns the activation node
/// (softplus output, K x N).
pub(crate) fn encode_nodes(
    g: &mut Graph,
    config: &ModelConfig,
    ids: &ParamIds,
    input: NodeId,
) -> Result<NodeId> {
    match (config.variant, ids) {
        (Variant::Ff, ParamIds::Dense { encoder, .. }) => {
            let pre = g.matmul(*encoder, input)?;
            g.softplus(pre)
        }
        (Variant::Ccae, ParamIds::Dense { encoder, .. }) => {
            let pre = g.causal_conv_time(input, *encoder)?;
            g.softplus(pre)
        }
        (Variant::Rcae, ParamIds::Recurrent { cells, .. }) => {
            let frames = g.value(input).cols();
            let hidden = config.rnn_hidden;
            let columns: Vec<NodeId> = (0..frames)
                .map(|t| g.column(input, t))
                .collect::<Result<_>>()?;
            let mut component_rows = Vec::with_capacity(cells.len());
            for cell in cells {
                let mut state = g.constant(Tensor::zeros(&[hidden, 1]))?;
                let mut memory = g.constant(Tensor::zeros(&[hidden, 1]))?;
                let mut steps = Vec::with_capacity(frames);
                for &x_t in &columns {
                    let h_t = match cell {
                        CellIds::Lstm(weights) => {
                            let (h_t, c_t) = lstm_cell_step(g, weights, x_t, state, memory)?;
                            memory = c_t;
                            h_t
                        }
                        CellIds::Vanilla { recurrent, project } => {
                            let from_input = g.matmul(*project, x_t)?;
                            let from_state = g.matmul(*recurrent, state)?;
                            let pre = g.add(from_input, from_state)?;
                            g.tanh(pre)?
                        }
                    };
                    state = h_t;
                    steps.push(h_t);
                }
                let stacked = g.concat_cols(&steps)?;
                component_rows.push(g.sum_rows(stacked)?);
            }
            let summed = g.concat_rows(&component_rows)?;
            g.softplus(summed)
        }
        _ => Err(Error::invalid("parameter layout does not match variant")),
    }
}

/// Builds the decoder on top of a code node and returns the reconstruction
/// (softplus output, M x N).
pub(crate) fn decode_nodes(
    g: &mut Graph,
    config: &ModelConfig,
    ids: &ParamIds,
    code: NodeId,
) -> Result<NodeId> {
    let pre = match (config.variant, ids) {
        (Variant::Ff, ParamIds::Dense { decoder, .. }) => g.matmul(*decoder, code)?,
        (_, ParamIds::Dense { decoder, .. }) | (_, ParamIds::Recurrent { decoder, .. }) => {
            g.causal_conv_time_transposed(code, *decoder)?
        }
    };
    g.softplus(pre)
}

/// Encoder plus decoder; returns (code, reconstruction).
pub(crate) fn forward_nodes(
    g: &mut Graph,
    config: &ModelConfig,
    ids: &ParamIds,
    input: NodeId,
) -> Result<(NodeId, NodeId)> {
    let code = encode_nodes(g, config, ids, input)?;
    let output = decode_nodes(g, config, ids, code)?;
    Ok((code, output))
}

/// KL reconstruction term plus optional weighted L1 of the code.
pub(crate) struct LossNodes {
    pub total: NodeId,
    pub kl: NodeId,
    pub sparsity: Option<NodeId>,
}

pub(crate) fn loss_nodes(
    g: &mut Graph,
    target: NodeId,
    output: NodeId,
    code: NodeId,
    sparsity_weight: f64,
) -> Result<LossNodes> {
    let kl = g.kl_div(target, output)?;
    if sparsity_weight > 0.0 {
        let l1 = g.l1(code)?;
        let weighted = g.scale(l1, sparsity_weight)?;
        let total = g.add(kl, weighted)?;
        Ok(LossNodes {
            total,
            kl,
            sparsity: Some(weighted),
        })
    } else {
        Ok(LossNodes {
            total: kl,
            kl,
            sparsity: None,
        })
    }
}
