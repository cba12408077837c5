//! Full-batch gradient-descent training of one model on a clean-source
//! corpus. Each utterance is forwarded separately within one graph so the
//! convolution history restarts at utterance boundaries, and the per-
//! utterance losses are summed into a single batch objective.

use super::{build, Model, ModelConfig, ModelParams};
use crate::autodiff::{clip_global_norm, Graph, RmsProp, Tensor};
use crate::dsp::MagnitudeSpectrogram;
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// One iteration's objective, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub kl: f64,
    pub sparsity: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.kl + self.sparsity
    }
}

/// Loss trajectory and timing of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Objective per iteration, evaluated before that iteration's update.
    pub trajectory: Vec<LossTerms>,
    pub wall_seconds: f64,
}

fn check_corpus(config: &ModelConfig, corpus: &[MagnitudeSpectrogram]) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    for (i, x) in corpus.iter().enumerate() {
        if x.bins() != config.bins {
            return Err(Error::shape(format!(
                "corpus item {} has {} bins, model expects {}",
                i,
                x.bins(),
                config.bins
            )));
        }
    }
    Ok(())
}

/// Batch loss and its gradients with respect to every parameter tensor
/// (in [`ModelParams::tensors`] order).
pub fn loss_gradients(
    config: &ModelConfig,
    params: &ModelParams,
    corpus: &[MagnitudeSpectrogram],
) -> Result<(LossTerms, Vec<Tensor>)> {
    check_corpus(config, corpus)?;
    let mut g = Graph::new();
    let ids = build::add_params(&mut g, params, true)?;
    let (terms, total) = batch_loss(&mut g, config, &ids, corpus)?;
    g.backward(total)?;
    let grads = ids
        .flat()
        .iter()
        .map(|&id| g.grad(id).expect("parameter gradient").clone())
        .collect();
    Ok((terms, grads))
}

/// Batch loss only, without differentiation.
pub fn evaluate_loss(
    config: &ModelConfig,
    params: &ModelParams,
    corpus: &[MagnitudeSpectrogram],
) -> Result<LossTerms> {
    check_corpus(config, corpus)?;
    let mut g = Graph::new();
    let ids = build::add_params(&mut g, params, false)?;
    let (terms, _) = batch_loss(&mut g, config, &ids, corpus)?;
    Ok(terms)
}

fn batch_loss(
    g: &mut Graph,
    config: &ModelConfig,
    ids: &build::ParamIds,
    corpus: &[MagnitudeSpectrogram],
) -> Result<(LossTerms, crate::autodiff::NodeId)> {
    let mut kl_sum = 0.0;
    let mut sparsity_sum = 0.0;
    let mut total: Option<crate::autodiff::NodeId> = None;
    for x in corpus {
        let input = g.constant(x.values().clone())?;
        let (code, output) = build::forward_nodes(g, config, ids, input)?;
        let parts = build::loss_nodes(g, input, output, code, config.sparsity_weight)?;
        kl_sum += g.value(parts.kl).data()[0];
        if let Some(sp) = parts.sparsity {
            sparsity_sum += g.value(sp).data()[0];
        }
        total = Some(match total {
            None => parts.total,
            Some(t) => g.add(t, parts.total)?,
        });
    }
    Ok((
        LossTerms {
            kl: kl_sum,
            sparsity: sparsity_sum,
        },
        total.expect("non-empty corpus"),
    ))
}

/// Trains a fresh model for `config.train.iterations` full-batch RMSProp
/// steps. Deterministic for a fixed config, seed, and corpus.
pub fn train(
    config: &ModelConfig,
    corpus: &[MagnitudeSpectrogram],
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    check_corpus(config, corpus)?;
    let start = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    let mut params = ModelParams::init(config, &mut rng)?;
    let shapes: Vec<Vec<usize>> = params.tensors().iter().map(|t| t.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let mut optimizer = RmsProp::new(config.train.optimizer, &shape_refs);

    let mut trajectory = Vec::with_capacity(config.train.iterations);
    for iteration in 0..config.train.iterations {
        let (terms, mut grads) =
            loss_gradients(config, &params, corpus).map_err(|e| match e {
                Error::NonFinite(what) => Error::Numerical {
                    iteration,
                    message: what,
                },
                other => other,
            })?;
        if !terms.total().is_finite() {
            return Err(Error::Numerical {
                iteration,
                message: format!("loss became non-finite ({})", terms.total()),
            });
        }
        trajectory.push(terms);

        if let Some(max_norm) = config.train.clip_norm {
            clip_global_norm(&mut grads, max_norm);
        }
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        let mut param_refs = params.tensors_mut();
        optimizer.step(&mut param_refs, &grad_refs)?;
    }

    Ok((
        Model {
            config: config.clone(),
            params,
        },
        TrainReport {
            trajectory,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_gradients, max_relative_error};
    use crate::dsp::MagnitudeSpectrogram;
    use crate::model::tests::test_frame;
    use crate::model::{RnnCell, Variant};
    use rand::Rng;

    fn small_corpus(bins: usize, frames: usize, items: usize, seed: u64) -> Vec<MagnitudeSpectrogram> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..items)
            .map(|_| {
                MagnitudeSpectrogram::new(
                    Tensor::from_fn(&[bins, frames], |_| rng.gen_range(0.0..1.5)),
                    test_frame(bins),
                )
                .unwrap()
            })
            .collect()
    }

    fn gradcheck_variant(mut config: ModelConfig) {
        config.sparsity_weight = 1e-3;
        config.train.seed = 5;
        let model = Model::init(config.clone()).unwrap();
        let corpus = small_corpus(config.bins, 10, 1, 17);

        let (_, analytic) = loss_gradients(&config, &model.params, &corpus).unwrap();

        let flat: Vec<Tensor> = model.params.tensors().into_iter().cloned().collect();
        let mut probe = model.params.clone();
        let numeric = finite_difference_gradients(&flat, 1e-5, |p| {
            for (dst, src) in probe.tensors_mut().into_iter().zip(p) {
                *dst = src.clone();
            }
            Ok(evaluate_loss(&config, &probe, &corpus)?.total())
        })
        .unwrap();

        let err = max_relative_error(&analytic, &numeric, 1e-8);
        assert!(err < 1e-4, "{:?}: max relative error {err}", config.variant);
    }

    #[test]
    fn ccae_loss_gradients_match_finite_differences() {
        gradcheck_variant(ModelConfig::new(Variant::Ccae, 2, 3, 6));
    }

    #[test]
    fn ff_loss_gradients_match_finite_differences() {
        gradcheck_variant(ModelConfig::new(Variant::Ff, 3, 1, 6));
    }

    #[test]
    fn rcae_lstm_loss_gradients_match_finite_differences() {
        let mut cfg = ModelConfig::new(Variant::Rcae, 2, 3, 5);
        cfg.rnn_hidden = 3;
        gradcheck_variant(cfg);
    }

    #[test]
    fn rcae_vanilla_loss_gradients_match_finite_differences() {
        let mut cfg = ModelConfig::new(Variant::Rcae, 2, 3, 5);
        cfg.rnn_hidden = 3;
        cfg.rnn_cell = RnnCell::Vanilla;
        gradcheck_variant(cfg);
    }

    #[test]
    fn zero_iterations_returns_initial_params() {
        let mut cfg = ModelConfig::new(Variant::Ccae, 2, 3, 5);
        cfg.train.iterations = 0;
        let corpus = small_corpus(5, 8, 2, 3);
        let (model, report) = train(&cfg, &corpus).unwrap();
        assert!(report.trajectory.is_empty());
        assert_eq!(model.params, Model::init(cfg).unwrap().params);
    }

    #[test]
    fn training_is_deterministic() {
        let mut cfg = ModelConfig::new(Variant::Ccae, 2, 3, 5);
        cfg.train.iterations = 25;
        let corpus = small_corpus(5, 8, 2, 4);
        let (m1, r1) = train(&cfg, &corpus).unwrap();
        let (m2, r2) = train(&cfg, &corpus).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(r1.trajectory, r2.trajectory);
    }

    #[test]
    fn training_reduces_loss_on_small_problem() {
        let mut cfg = ModelConfig::new(Variant::Ccae, 2, 3, 5);
        cfg.train.iterations = 200;
        let corpus = small_corpus(5, 12, 1, 5);
        let (_, report) = train(&cfg, &corpus).unwrap();
        let first = report.trajectory.first().unwrap().total();
        let last = report.trajectory.last().unwrap().total();
        assert!(last < first, "loss did not fall: {first} -> {last}");
        assert_eq!(report.trajectory.len(), 200);
    }

    #[test]
    fn corpus_bin_mismatch_is_rejected() {
        let cfg = ModelConfig::new(Variant::Ccae, 2, 3, 5);
        let corpus = small_corpus(6, 8, 1, 6);
        assert!(train(&cfg, &corpus).is_err());
    }
}
