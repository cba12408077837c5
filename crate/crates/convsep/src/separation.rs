//! Two-source separation by input optimization: both autoencoders stay
//! frozen while the free input spectrograms are gradient-descended so the
//! summed model outputs explain the mixture magnitude. The optimized
//! estimates then drive ratio masks over the complex mixture.

use crate::autodiff::{
    clip_global_norm, softplus, softplus_inverse, Graph, RmsProp, RmsPropConfig, Tensor,
};
use crate::dsp::{masked_resynthesis, split, AudioSignal, ComplexSpectrogram, MagnitudeSpectrogram};
use crate::error::{Error, Result};
use crate::model::{build, Model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Floor for the half-mixture initialization of zero-valued bins.
const INIT_EPS: f64 = 1e-6;

/// How the free inputs are kept non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputParam {
    /// X = softplus(V) with V unconstrained.
    SoftplusReparam,
    /// X itself is optimized and clamped at zero after every step.
    Projected,
}

/// Starting point for the free inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Every source starts at half the mixture magnitude.
    HalfMixture,
    /// Xavier-scaled noise.
    RandomPositive,
}

/// Which magnitudes feed the resynthesis masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSource {
    /// The model reconstructions (the quantity constrained by each source
    /// model).
    ModelOutputs,
    /// The raw optimized inputs.
    OptimizedInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub iterations: usize,
    pub optimizer: RmsPropConfig,
    pub parameterization: InputParam,
    pub init: InitStrategy,
    pub mask_source: MaskSource,
    pub seed: u64,
    pub clip_norm: Option<f64>,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            iterations: 500,
            optimizer: RmsPropConfig::default(),
            parameterization: InputParam::SoftplusReparam,
            init: InitStrategy::HalfMixture,
            mask_source: MaskSource::ModelOutputs,
            seed: 0,
            clip_norm: Some(100.0),
        }
    }
}

/// Everything a separation run produces.
#[derive(Debug, Clone)]
pub struct SeparationResult {
    /// Optimized input spectrograms X1, X2.
    pub inputs: [MagnitudeSpectrogram; 2],
    /// Model reconstructions of the optimized inputs.
    pub outputs: [MagnitudeSpectrogram; 2],
    /// Masked time-domain sources.
    pub signals: [AudioSignal; 2],
    /// KL objective per iteration.
    pub trajectory: Vec<f64>,
}

/// Initial latent tensors V (one per source) for a mixture magnitude.
/// Half-mixture inverts the softplus at max(mixture/2, 1e-6); random
/// initialization draws Xavier-scaled noise. Deterministic given the seed.
pub fn init_inputs(
    mixture_mag: &MagnitudeSpectrogram,
    num_sources: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Vec<Tensor> {
    let shape = [mixture_mag.bins(), mixture_mag.frames()];
    match strategy {
        InitStrategy::HalfMixture => {
            let v = Tensor::from_fn(&shape, |i| {
                softplus_inverse((mixture_mag.values().data()[i] / 2.0).max(INIT_EPS))
            });
            vec![v; num_sources]
        }
        InitStrategy::RandomPositive => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fan = mixture_mag.bins();
            (0..num_sources)
                .map(|_| crate::autodiff::xavier_uniform(&shape, fan, fan, &mut rng))
                .collect()
        }
    }
}

/// Separates `mixture` with the two frozen source models, initializing the
/// free inputs according to the config.
pub fn separate(
    model1: &Model,
    model2: &Model,
    mixture: &ComplexSpectrogram,
    config: &SeparationConfig,
) -> Result<SeparationResult> {
    let (mix_mag, _) = split(mixture);
    let inits = init_inputs(&mix_mag, 2, config.init, config.seed);
    let latents = [inits[0].clone(), inits[1].clone()];
    separate_with_inits(model1, model2, mixture, config, latents)
}

/// Separation with caller-provided initial latents (position-matched to the
/// models), the primitive behind [`separate`].
pub fn separate_with_inits(
    model1: &Model,
    model2: &Model,
    mixture: &ComplexSpectrogram,
    config: &SeparationConfig,
    init_latents: [Tensor; 2],
) -> Result<SeparationResult> {
    if config.iterations == 0 {
        return Err(Error::invalid("separation needs at least 1 iteration"));
    }
    let bins = mixture.bins();
    for (i, model) in [model1, model2].iter().enumerate() {
        if model.config.bins != bins {
            return Err(Error::shape(format!(
                "model {} expects {} bins, mixture has {}",
                i + 1,
                model.config.bins,
                bins
            )));
        }
    }
    let (mix_mag, _) = split(mixture);
    let shape = [bins, mixture.frames()];
    for v in &init_latents {
        if v.shape() != shape {
            return Err(Error::shape(format!(
                "init latent {:?} vs mixture {:?}",
                v.shape(),
                shape
            )));
        }
    }

    // For the projected parameterization the free variable is X itself;
    // both parameterizations start from the same X = softplus(V).
    let mut free: [Tensor; 2] = match config.parameterization {
        InputParam::SoftplusReparam => init_latents,
        InputParam::Projected => [softplus(&init_latents[0]), softplus(&init_latents[1])],
    };

    let shapes: Vec<&[usize]> = vec![&shape, &shape];
    let mut optimizer = RmsProp::new(config.optimizer, &shapes);
    let mut trajectory = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let mut g = Graph::new();
        let target = g.constant(mix_mag.values().clone())?;
        let v1 = g.param(free[0].clone())?;
        let v2 = g.param(free[1].clone())?;
        let (x1, x2) = match config.parameterization {
            InputParam::SoftplusReparam => (g.softplus(v1)?, g.softplus(v2)?),
            InputParam::Projected => (v1, v2),
        };
        let ids1 = build::add_params(&mut g, &model1.params, false)?;
        let ids2 = build::add_params(&mut g, &model2.params, false)?;
        let (_, out1) = build::forward_nodes(&mut g, &model1.config, &ids1, x1)?;
        let (_, out2) = build::forward_nodes(&mut g, &model2.config, &ids2, x2)?;
        let summed = g.add(out1, out2)?;
        let loss = g.kl_div(target, summed)?;

        let loss_value = g.value(loss).data()[0];
        if !loss_value.is_finite() {
            return Err(Error::Numerical {
                iteration,
                message: format!("separation loss became non-finite ({loss_value})"),
            });
        }
        trajectory.push(loss_value);

        g.backward(loss).map_err(|e| Error::Numerical {
            iteration,
            message: e.to_string(),
        })?;
        let mut grads = [
            g.grad(v1).expect("latent gradient").clone(),
            g.grad(v2).expect("latent gradient").clone(),
        ];
        drop(g);

        if let Some(max_norm) = config.clip_norm {
            clip_global_norm(&mut grads, max_norm);
        }
        let [f1, f2] = &mut free;
        optimizer.step(&mut [f1, f2], &[&grads[0], &grads[1]])?;

        if config.parameterization == InputParam::Projected {
            for f in &mut free {
                for v in f.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    // Final inputs and frozen-model reconstructions.
    let frame = *mixture.frame();
    let x_final = match config.parameterization {
        InputParam::SoftplusReparam => [softplus(&free[0]), softplus(&free[1])],
        InputParam::Projected => free,
    };
    let inputs = [
        MagnitudeSpectrogram::new(x_final[0].clone(), frame)?,
        MagnitudeSpectrogram::new(x_final[1].clone(), frame)?,
    ];
    let (out1, _) = crate::model::forward(model1, &inputs[0])?;
    let (out2, _) = crate::model::forward(model2, &inputs[1])?;
    let outputs = [out1, out2];

    let mask_mags: &[MagnitudeSpectrogram; 2] = match config.mask_source {
        MaskSource::ModelOutputs => &outputs,
        MaskSource::OptimizedInputs => &inputs,
    };
    let signals = masked_resynthesis(mask_mags, mixture)?;
    let mut signals = signals.into_iter();
    let signals = [signals.next().unwrap(), signals.next().unwrap()];

    Ok(SeparationResult {
        inputs,
        outputs,
        signals,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{istft, FrameSpec, Window};
    use crate::model::{ModelConfig, Variant};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn mixture_spec(seed: u64, frames: usize) -> ComplexSpectrogram {
        let frame = FrameSpec {
            frame_size: 16,
            hop: 4,
            window: Window::Hann,
            sample_rate: 8000,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..frame.bins() * frames)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexSpectrogram::new(data, frames, frame).unwrap()
    }

    fn tiny_model(seed: u64) -> Model {
        let mut cfg = ModelConfig::new(Variant::Ccae, 2, 3, 9);
        cfg.train.seed = seed;
        Model::init(cfg).unwrap()
    }

    fn quick_config() -> SeparationConfig {
        SeparationConfig {
            iterations: 15,
            ..SeparationConfig::default()
        }
    }

    #[test]
    fn half_mixture_init_inverts_to_half() {
        let frame = FrameSpec {
            frame_size: 16,
            hop: 4,
            window: Window::Hann,
            sample_rate: 8000,
        };
        let mag =
            MagnitudeSpectrogram::new(Tensor::filled(&[9, 5], 2.0), frame).unwrap();
        let latents = init_inputs(&mag, 2, InitStrategy::HalfMixture, 0);
        for v in &latents {
            let x = softplus(v);
            assert!(x.data().iter().all(|&e| (e - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn zero_bins_init_at_floor() {
        let frame = FrameSpec {
            frame_size: 16,
            hop: 4,
            window: Window::Hann,
            sample_rate: 8000,
        };
        let mag = MagnitudeSpectrogram::new(Tensor::zeros(&[9, 4]), frame).unwrap();
        let latents = init_inputs(&mag, 2, InitStrategy::HalfMixture, 0);
        assert!(latents[0].all_finite());
        let x = softplus(&latents[0]);
        assert!(x.data().iter().all(|&e| (e - 1e-6).abs() < 1e-12));
    }

    #[test]
    fn random_init_is_deterministic_per_seed() {
        let (mag, _) = split(&mixture_spec(1, 6));
        let a = init_inputs(&mag, 2, InitStrategy::RandomPositive, 7);
        let b = init_inputs(&mag, 2, InitStrategy::RandomPositive, 7);
        assert_eq!(a[0].data(), b[0].data());
        assert_eq!(a[1].data(), b[1].data());
        assert_ne!(a[0].data(), a[1].data());
    }

    #[test]
    fn identical_models_split_the_mixture_in_half() {
        let mixture = mixture_spec(2, 8);
        let model = tiny_model(3);
        let result = separate(&model, &model, &mixture, &quick_config()).unwrap();
        let full = istft(&mixture).unwrap();
        for (a, b) in result.outputs[0]
            .values()
            .data()
            .iter()
            .zip(result.outputs[1].values().data())
        {
            assert_eq!(a, b);
        }
        for source in &result.signals {
            for (y, x) in source.samples().iter().zip(full.samples()) {
                assert!((y - x / 2.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn model_weights_stay_frozen() {
        let mixture = mixture_spec(4, 8);
        let m1 = tiny_model(5);
        let m2 = tiny_model(6);
        let before1 = m1.params.clone();
        let before2 = m2.params.clone();
        separate(&m1, &m2, &mixture, &quick_config()).unwrap();
        assert_eq!(m1.params, before1);
        assert_eq!(m2.params, before2);
    }

    #[test]
    fn masked_signals_sum_to_mixture_inverse() {
        let mixture = mixture_spec(7, 8);
        let result = separate(&tiny_model(8), &tiny_model(9), &mixture, &quick_config()).unwrap();
        let full = istft(&mixture).unwrap();
        for n in 0..full.samples().len() {
            let sum = result.signals[0].samples()[n] + result.signals[1].samples()[n];
            assert!((sum - full.samples()[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn inputs_stay_non_negative_under_both_parameterizations() {
        let mixture = mixture_spec(10, 8);
        for parameterization in [InputParam::SoftplusReparam, InputParam::Projected] {
            let config = SeparationConfig {
                parameterization,
                ..quick_config()
            };
            let result =
                separate(&tiny_model(11), &tiny_model(12), &mixture, &config).unwrap();
            for x in &result.inputs {
                assert!(x.values().data().iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn swapping_models_and_inits_swaps_the_outputs() {
        let mixture = mixture_spec(13, 8);
        let (mag, _) = split(&mixture);
        let m1 = tiny_model(14);
        let m2 = tiny_model(15);
        let config = SeparationConfig {
            init: InitStrategy::RandomPositive,
            ..quick_config()
        };
        let inits = init_inputs(&mag, 2, InitStrategy::RandomPositive, config.seed);
        let fwd = separate_with_inits(
            &m1,
            &m2,
            &mixture,
            &config,
            [inits[0].clone(), inits[1].clone()],
        )
        .unwrap();
        let rev = separate_with_inits(
            &m2,
            &m1,
            &mixture,
            &config,
            [inits[1].clone(), inits[0].clone()],
        )
        .unwrap();
        // Per-source optimization paths are independent, so the optimized
        // spectrograms swap bitwise.
        assert_eq!(fwd.inputs[0].values().data(), rev.inputs[1].values().data());
        assert_eq!(fwd.inputs[1].values().data(), rev.inputs[0].values().data());
        assert_eq!(
            fwd.outputs[0].values().data(),
            rev.outputs[1].values().data()
        );
        // Signals only agree to rounding: the exact-partition mask derives
        // the last source's mask from the first.
        for (a, b) in fwd.signals[0]
            .samples()
            .iter()
            .zip(rev.signals[1].samples())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_mismatch_is_rejected() {
        let mixture = mixture_spec(16, 8);
        let mut cfg = ModelConfig::new(Variant::Ccae, 2, 3, 5);
        cfg.train.seed = 17;
        let bad = Model::init(cfg).unwrap();
        assert!(separate(&bad, &tiny_model(18), &mixture, &quick_config()).is_err());
    }
}
