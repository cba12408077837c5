//! Xavier (Glorot) uniform initialization.

use super::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// I.i.d. uniform samples on +-sqrt(6/(fan_in+fan_out)). All stochastic
/// initialization goes through one caller-provided generator so a single
/// seed fixes a whole model.
pub fn xavier_uniform(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) -> Tensor {
    assert!(fan_in > 0 && fan_out > 0, "fans must be positive");
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..=bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn bound_is_one_for_equal_fans_of_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = xavier_uniform(&[100], 3, 3, &mut rng);
        assert!(t.data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
        assert!(t.data().iter().any(|&v| v.abs() > 0.5));
    }

    #[test]
    fn same_seed_gives_identical_tensors() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let ta = xavier_uniform(&[4, 5], 10, 20, &mut a);
        let tb = xavier_uniform(&[4, 5], 10, 20, &mut b);
        assert_eq!(ta.data(), tb.data());
    }

    #[test]
    fn empirical_variance_matches_uniform_law() {
        // Var(U(-b,b)) = b^2/3 = 2/(fan_in+fan_out).
        let (fan_in, fan_out) = (4096, 80);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = xavier_uniform(&[100_000], fan_in, fan_out, &mut rng);
        let mean = t.sum() / t.len() as f64;
        let var = t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (t.len() - 1) as f64;
        let expect = 2.0 / (fan_in + fan_out) as f64;
        assert!(
            (var - expect).abs() / expect < 0.05,
            "var {var} vs {expect}"
        );
    }
}
