//! Central finite-difference gradient checking.
//!
//! The numeric side only ever calls the forward evaluation closure, so it
//! stays independent of the reverse-mode path it is used to verify.

use super::tensor::Tensor;
use crate::error::Result;

/// Central finite differences of `eval` with respect to every element of
/// every parameter tensor. `eval` must rebuild the computation from scratch
/// for the perturbed parameters.
pub fn finite_difference_gradients<F>(
    params: &[Tensor],
    step: f64,
    mut eval: F,
) -> Result<Vec<Tensor>>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let mut work: Vec<Tensor> = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut grad = Tensor::zeros(params[p].shape());
        for i in 0..params[p].len() {
            let original = work[p].data()[i];
            work[p].data_mut()[i] = original + step;
            let plus = eval(&work)?;
            work[p].data_mut()[i] = original - step;
            let minus = eval(&work)?;
            work[p].data_mut()[i] = original;
            grad.data_mut()[i] = (plus - minus) / (2.0 * step);
        }
        grads.push(grad);
    }
    Ok(grads)
}

/// Worst-case disagreement between analytic and numeric gradients. Elements
/// whose analytic magnitude is below `abs_floor` are compared absolutely;
/// the rest relatively, normalized by the larger magnitude.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor], abs_floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        debug_assert!(a.same_shape(n));
        for (&av, &nv) in a.data().iter().zip(n.data()) {
            let err = if av.abs() < abs_floor {
                (av - nv).abs()
            } else {
                (av - nv).abs() / av.abs().max(nv.abs())
            };
            worst = worst.max(err);
        }
    }
    worst
}
