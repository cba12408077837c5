//! RMSProp with heavy-ball momentum on the normalized gradient.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hyperparameters of the update
/// `r <- decay*r + (1-decay)*g^2`,
/// `m <- momentum*m + g/sqrt(r+eps)`,
/// `theta <- theta - learning_rate*m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            momentum: 0.7,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter squared-gradient average `r` and momentum buffer `m`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    r: Tensor,
    m: Tensor,
}

/// RMSProp over a fixed list of parameter tensors (matched by position).
#[derive(Debug, Clone)]
pub struct RmsProp {
    config: RmsPropConfig,
    states: Vec<OptimizerState>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, shapes: &[&[usize]]) -> RmsProp {
        let states = shapes
            .iter()
            .map(|s| OptimizerState {
                r: Tensor::zeros(s),
                m: Tensor::zeros(s),
            })
            .collect();
        RmsProp { config, states }
    }

    pub fn config(&self) -> &RmsPropConfig {
        &self.config
    }

    /// Applies one update in place. Parameter and gradient lists must match
    /// the shapes the optimizer was created with.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::invalid(format!(
                "rmsprop: expected {} tensors, got {} params / {} grads",
                self.states.len(),
                params.len(),
                grads.len()
            )));
        }
        let cfg = self.config;
        for ((param, grad), state) in params.iter_mut().zip(grads).zip(&mut self.states) {
            if !grad.all_finite() {
                return Err(Error::NonFinite("rmsprop gradient".to_string()));
            }
            if !param.same_shape(grad) || !param.same_shape(&state.r) {
                return Err(Error::shape(format!(
                    "rmsprop: param {:?} vs grad {:?}",
                    param.shape(),
                    grad.shape()
                )));
            }
            let p = param.data_mut();
            let g = grad.data();
            let r = state.r.data_mut();
            let m = state.m.data_mut();
            for i in 0..p.len() {
                r[i] = cfg.decay * r[i] + (1.0 - cfg.decay) * g[i] * g[i];
                m[i] = cfg.momentum * m[i] + g[i] / (r[i] + cfg.epsilon).sqrt();
                p[i] -= cfg.learning_rate * m[i];
            }
        }
        Ok(())
    }
}

/// Scales all gradients by `max_norm/norm` when their joint L2 norm exceeds
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_setup() -> (RmsProp, Tensor) {
        let cfg = RmsPropConfig::default();
        (RmsProp::new(cfg, &[&[1][..]]), Tensor::scalar(1.0))
    }

    #[test]
    fn zero_gradient_leaves_parameters_fixed() {
        let (mut opt, mut theta) = scalar_setup();
        let zero = Tensor::scalar(0.0);
        for _ in 0..5 {
            opt.step(&mut [&mut theta], &[&zero]).unwrap();
        }
        assert_eq!(theta.data()[0], 1.0);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let (mut opt, mut theta) = scalar_setup();
        let g = Tensor::scalar(1.0);
        opt.step(&mut [&mut theta], &[&g]).unwrap();
        // r = 0.1, m = 1/sqrt(0.1 + 1e-8), delta = -0.001*m
        let expect = 1.0 - 0.001 / (0.1f64 + 1e-8).sqrt();
        assert!((theta.data()[0] - expect).abs() < 1e-15);
        assert!((theta.data()[0] - (1.0 - 3.1623e-3)).abs() < 1e-7);
    }

    #[test]
    fn two_identical_steps_match_hand_evaluation() {
        let (mut opt, mut theta) = scalar_setup();
        let g = Tensor::scalar(1.0);
        opt.step(&mut [&mut theta], &[&g]).unwrap();
        opt.step(&mut [&mut theta], &[&g]).unwrap();
        let m1 = 1.0 / (0.1f64 + 1e-8).sqrt();
        let r2: f64 = 0.9 * 0.1 + 0.1;
        let m2 = 0.7 * m1 + 1.0 / (r2 + 1e-8).sqrt();
        let expect = 1.0 - 0.001 * (m1 + m2);
        assert!((theta.data()[0] - expect).abs() < 1e-15);
        // The accumulator damps step 2 below the pure heavy-ball ratio.
        let delta1 = 0.001 * m1;
        let delta2 = 0.001 * m2;
        assert!(delta2 / delta1 < 1.7);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let (mut opt, mut theta) = scalar_setup();
        let g = Tensor::scalar(f64::NAN);
        assert!(opt.step(&mut [&mut theta], &[&g]).is_err());
    }

    #[test]
    fn determinism_given_state() {
        let cfg = RmsPropConfig::default();
        let run = || {
            let mut opt = RmsProp::new(cfg, &[&[3][..]]);
            let mut theta = Tensor::from_vec(&[3], vec![0.5, -0.25, 2.0]).unwrap();
            let g1 = Tensor::from_vec(&[3], vec![0.1, 0.7, -0.3]).unwrap();
            let g2 = Tensor::from_vec(&[3], vec![-0.2, 0.4, 0.9]).unwrap();
            opt.step(&mut [&mut theta], &[&g1]).unwrap();
            opt.step(&mut [&mut theta], &[&g2]).unwrap();
            theta
        };
        assert_eq!(run().data(), run().data());
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut grads = vec![Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap()];
        let norm = clip_global_norm(&mut grads, 10.0);
        assert_eq!(norm, 5.0);
        assert_eq!(grads[0].data(), &[3.0, 4.0]);

        let norm = clip_global_norm(&mut grads, 1.0);
        assert_eq!(norm, 5.0);
        assert!((grads[0].l2_norm() - 1.0).abs() < 1e-12);
    }
}
