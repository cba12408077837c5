//! Tensor-level math shared by the eager API and the graph ops: time
//! convolutions, matrix products, elementwise nonlinearities, and the
//! generalized KL divergence.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Reconstruction floor inside the KL log term.
pub const KL_EPS: f64 = 1e-8;

pub fn softplus_scalar(x: f64) -> f64 {
    // log(1+exp(x)); for large x, exp(x) overflows, so flip to x + log1p(exp(-x)).
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of `softplus_scalar` for y > 0.
pub fn softplus_inverse(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    y + (-(-y).exp_m1()).ln()
}

/// Elementwise softplus, the non-negativity map used by every model.
pub fn softplus(x: &Tensor) -> Tensor {
    x.map(softplus_scalar)
}

/// Generalized KL divergence: sum of x*log(x/xhat) - x + xhat, with the
/// convention 0*log(0) = 0 and xhat floored at `KL_EPS` inside the log.
pub fn kl_divergence(x: &Tensor, xhat: &Tensor) -> Result<f64> {
    if !x.same_shape(xhat) {
        return Err(Error::shape(format!(
            "kl_divergence: {:?} vs {:?}",
            x.shape(),
            xhat.shape()
        )));
    }
    let mut total = 0.0;
    for (&a, &b) in x.data().iter().zip(xhat.data()) {
        if a < 0.0 || b < 0.0 {
            return Err(Error::invalid(
                "kl_divergence: negative entry".to_string(),
            ));
        }
        total += if a > 0.0 {
            a * (a / b.max(KL_EPS)).ln() - a + b
        } else {
            b
        };
    }
    Ok(total)
}

/// d/d(xhat) of `kl_divergence`, elementwise 1 - x/max(xhat, eps).
pub(crate) fn kl_grad_estimate(x: &Tensor, xhat: &Tensor) -> Tensor {
    Tensor::from_fn(x.shape(), |i| {
        1.0 - x.data()[i] / xhat.data()[i].max(KL_EPS)
    })
}

/// Causal convolution along time: `out(i,t) = sum_j sum_k F(i,j,k) * X(j,t-k)`
/// with zero history for t-k < 0. Input is M x N, filters K x M x T, output
/// K x N.
pub fn causal_conv_time(input: &Tensor, filters: &Tensor) -> Result<Tensor> {
    let (m, n) = conv_check_input(input)?;
    let fs = filters.shape();
    if fs.len() != 3 || fs[1] != m {
        return Err(Error::shape(format!(
            "causal_conv_time: filters {:?} do not match input height {}",
            fs, m
        )));
    }
    let (k_out, t_len) = (fs[0], fs[2]);
    let mut out = Tensor::zeros(&[k_out, n]);
    let f = filters.data();
    let x = input.data();
    let o = out.data_mut();
    for i in 0..k_out {
        let out_row = &mut o[i * n..(i + 1) * n];
        for j in 0..m {
            let in_row = &x[j * n..(j + 1) * n];
            let f_base = (i * m + j) * t_len;
            for tau in 0..t_len.min(n) {
                let w = f[f_base + tau];
                if w != 0.0 {
                    for t in 0..n - tau {
                        out_row[t + tau] += w * in_row[t];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of `causal_conv_time` with respect to the input:
/// `dX(j,s) = sum_i sum_k F(i,j,k) * dOut(i,s+k)`.
pub(crate) fn conv_time_grad_input(
    grad_out: &Tensor,
    filters: &Tensor,
    m: usize,
    n: usize,
) -> Tensor {
    let fs = filters.shape();
    let (k_out, t_len) = (fs[0], fs[2]);
    let mut grad_in = Tensor::zeros(&[m, n]);
    let g = grad_out.data();
    let f = filters.data();
    let gi = grad_in.data_mut();
    for i in 0..k_out {
        let g_row = &g[i * n..(i + 1) * n];
        for j in 0..m {
            let gi_row = &mut gi[j * n..(j + 1) * n];
            let f_base = (i * m + j) * t_len;
            for tau in 0..t_len.min(n) {
                let w = f[f_base + tau];
                if w != 0.0 {
                    for s in 0..n - tau {
                        gi_row[s] += w * g_row[s + tau];
                    }
                }
            }
        }
    }
    grad_in
}

/// Gradient of `causal_conv_time` with respect to the filters:
/// `dF(i,j,k) = sum_t dOut(i,t) * X(j,t-k)`.
pub(crate) fn conv_time_grad_filters(
    grad_out: &Tensor,
    input: &Tensor,
    k_out: usize,
    t_len: usize,
) -> Tensor {
    let (m, n) = (input.rows(), input.cols());
    let mut grad_f = Tensor::zeros(&[k_out, m, t_len]);
    let g = grad_out.data();
    let x = input.data();
    let gf = grad_f.data_mut();
    for i in 0..k_out {
        let g_row = &g[i * n..(i + 1) * n];
        for j in 0..m {
            let in_row = &x[j * n..(j + 1) * n];
            let f_base = (i * m + j) * t_len;
            for tau in 0..t_len.min(n) {
                gf[f_base + tau] = dot(&g_row[tau..], &in_row[..n - tau]);
            }
        }
    }
    grad_f
}

/// Decoder-side convolution: `out(f,t) = sum_i sum_k F(i,k,f) * H(i,t-k)`,
/// accumulating the contributions of all K code rows. Code is K x N,
/// filters K x T x M, output M x N.
pub fn causal_conv_time_transposed_accumulate(code: &Tensor, filters: &Tensor) -> Result<Tensor> {
    let (k_in, n) = conv_check_input(code)?;
    let fs = filters.shape();
    if fs.len() != 3 || fs[0] != k_in {
        return Err(Error::shape(format!(
            "causal_conv_time_transposed_accumulate: filters {:?} do not match code height {}",
            fs, k_in
        )));
    }
    let (t_len, m) = (fs[1], fs[2]);
    let mut out = Tensor::zeros(&[m, n]);
    let f = filters.data();
    let h = code.data();
    let o = out.data_mut();
    for i in 0..k_in {
        let code_row = &h[i * n..(i + 1) * n];
        for tau in 0..t_len.min(n) {
            let f_base = (i * t_len + tau) * m;
            for fr in 0..m {
                let w = f[f_base + fr];
                if w != 0.0 {
                    let out_row = &mut o[fr * n..(fr + 1) * n];
                    for t in 0..n - tau {
                        out_row[t + tau] += w * code_row[t];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of the decoder convolution with respect to the code:
/// `dH(i,s) = sum_f sum_k F(i,k,f) * dOut(f,s+k)`.
pub(crate) fn conv_transposed_grad_code(
    grad_out: &Tensor,
    filters: &Tensor,
    k_in: usize,
    n: usize,
) -> Tensor {
    let fs = filters.shape();
    let (t_len, m) = (fs[1], fs[2]);
    let mut grad_h = Tensor::zeros(&[k_in, n]);
    let g = grad_out.data();
    let f = filters.data();
    let gh = grad_h.data_mut();
    for i in 0..k_in {
        let gh_row = &mut gh[i * n..(i + 1) * n];
        for tau in 0..t_len.min(n) {
            let f_base = (i * t_len + tau) * m;
            for fr in 0..m {
                let w = f[f_base + fr];
                if w != 0.0 {
                    let g_row = &g[fr * n..(fr + 1) * n];
                    for s in 0..n - tau {
                        gh_row[s] += w * g_row[s + tau];
                    }
                }
            }
        }
    }
    grad_h
}

/// Gradient of the decoder convolution with respect to the filters:
/// `dF(i,k,f) = sum_t dOut(f,t) * H(i,t-k)`.
pub(crate) fn conv_transposed_grad_filters(
    grad_out: &Tensor,
    code: &Tensor,
    t_len: usize,
) -> Tensor {
    let (k_in, n) = (code.rows(), code.cols());
    let m = grad_out.rows();
    let mut grad_f = Tensor::zeros(&[k_in, t_len, m]);
    let g = grad_out.data();
    let h = code.data();
    let gf = grad_f.data_mut();
    for i in 0..k_in {
        let code_row = &h[i * n..(i + 1) * n];
        for tau in 0..t_len.min(n) {
            let f_base = (i * t_len + tau) * m;
            for fr in 0..m {
                let g_row = &g[fr * n..(fr + 1) * n];
                gf[f_base + fr] = dot(&g_row[tau..], &code_row[..n - tau]);
            }
        }
    }
    grad_f
}

/// Plain matrix product: (p x q) * (q x r) -> (p x r).
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.is_matrix() || !b.is_matrix() || a.cols() != b.rows() {
        return Err(Error::shape(format!(
            "matmul: {:?} * {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (p, q, r) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor::zeros(&[p, r]);
    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    for i in 0..p {
        let out_row = &mut od[i * r..(i + 1) * r];
        for k in 0..q {
            let aik = ad[i * q + k];
            if aik != 0.0 {
                let b_row = &bd[k * r..(k + 1) * r];
                for j in 0..r {
                    out_row[j] += aik * b_row[j];
                }
            }
        }
    }
    Ok(out)
}

/// a * b^T: (p x q) * (r x q) -> (p x r). Used for dA = dC * B^T.
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (p, q, r) = (a.rows(), a.cols(), b.rows());
    debug_assert_eq!(q, b.cols());
    let mut out = Tensor::zeros(&[p, r]);
    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    for i in 0..p {
        let a_row = &ad[i * q..(i + 1) * q];
        let out_row = &mut od[i * r..(i + 1) * r];
        for (j, out_v) in out_row.iter_mut().enumerate() {
            *out_v += dot(a_row, &bd[j * q..(j + 1) * q]);
        }
    }
    out
}

/// a^T * b: (q x p) * (q x r) -> (p x r). Used for dB = A^T * dC.
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (q, p, r) = (a.rows(), a.cols(), b.cols());
    debug_assert_eq!(q, b.rows());
    let mut out = Tensor::zeros(&[p, r]);
    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    for k in 0..q {
        let a_row = &ad[k * p..(k + 1) * p];
        let b_row = &bd[k * r..(k + 1) * r];
        for i in 0..p {
            let aki = a_row[i];
            if aki != 0.0 {
                let out_row = &mut od[i * r..(i + 1) * r];
                for j in 0..r {
                    out_row[j] += aki * b_row[j];
                }
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conv_check_input(input: &Tensor) -> Result<(usize, usize)> {
    if !input.is_matrix() {
        return Err(Error::shape(format!(
            "time convolution expects a matrix, got {:?}",
            input.shape()
        )));
    }
    Ok((input.rows(), input.cols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent nested-loop references for both convolution directions.
    fn conv_oracle(input: &Tensor, filters: &Tensor) -> Tensor {
        let (m, n) = (input.rows(), input.cols());
        let (k_out, t_len) = (filters.shape()[0], filters.shape()[2]);
        let mut out = Tensor::zeros(&[k_out, n]);
        for i in 0..k_out {
            for t in 0..n {
                let mut acc = 0.0;
                for j in 0..m {
                    for k in 0..t_len {
                        if t >= k {
                            acc += filters.at3(i, j, k) * input.at2(j, t - k);
                        }
                    }
                }
                out.set2(i, t, acc);
            }
        }
        out
    }

    fn conv_transposed_oracle(code: &Tensor, filters: &Tensor) -> Tensor {
        let (k_in, n) = (code.rows(), code.cols());
        let (t_len, m) = (filters.shape()[1], filters.shape()[2]);
        let mut out = Tensor::zeros(&[m, n]);
        for f in 0..m {
            for t in 0..n {
                let mut acc = 0.0;
                for i in 0..k_in {
                    for k in 0..t_len {
                        if t >= k {
                            acc += filters.at3(i, k, f) * code.at2(i, t - k);
                        }
                    }
                }
                out.set2(f, t, acc);
            }
        }
        out
    }

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn conv_identity_filter_selects_input_row() {
        // Delta at k=0 mapping input row 1 to output row 0.
        let input = Tensor::from_fn(&[3, 5], |i| i as f64);
        let mut filters = Tensor::zeros(&[2, 3, 4]);
        filters.data_mut()[(0 * 3 + 1) * 4] = 1.0;
        let out = causal_conv_time(&input, &filters).unwrap();
        assert_eq!(out.row(0), input.row(1));
        assert!(out.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_zero_input_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let filters = random_tensor(&[3, 4, 2], &mut rng);
        let out = causal_conv_time(&Tensor::zeros(&[4, 7]), &filters).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_tensor(&[5, 12], &mut rng);
        let filters = random_tensor(&[3, 5, 4], &mut rng);
        let out = causal_conv_time(&input, &filters).unwrap();
        let expect = conv_oracle(&input, &filters);
        for (a, b) in out.data().iter().zip(expect.data()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn conv_transposed_delta_maps_code_to_row() {
        // K=1, delta at k=0 onto frequency row 2.
        let code = Tensor::from_fn(&[1, 6], |i| (i + 1) as f64);
        let mut filters = Tensor::zeros(&[1, 3, 4]);
        filters.data_mut()[2] = 1.0; // (i=0, k=0, f=2)
        let out = causal_conv_time_transposed_accumulate(&code, &filters).unwrap();
        assert_eq!(out.row(2), code.row(0));
        assert!(out.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_transposed_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let code = random_tensor(&[3, 12], &mut rng);
        let filters = random_tensor(&[3, 4, 5], &mut rng);
        let out = causal_conv_time_transposed_accumulate(&code, &filters).unwrap();
        let expect = conv_transposed_oracle(&code, &filters);
        for (a, b) in out.data().iter().zip(expect.data()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn conv_rejects_mismatched_filters() {
        let input = Tensor::zeros(&[4, 7]);
        let filters = Tensor::zeros(&[2, 5, 3]);
        assert!(causal_conv_time(&input, &filters).is_err());
    }

    #[test]
    fn softplus_reference_points() {
        assert!((softplus_scalar(0.0) - 0.6931471805599453).abs() < 1e-15);
        assert!((softplus_scalar(100.0) - 100.0).abs() < 1e-12);
        let tiny = softplus_scalar(-40.0);
        assert!(tiny > 0.0 && (tiny - 4.248354255291589e-18).abs() < 1e-22);
    }

    #[test]
    fn softplus_inverse_roundtrip() {
        for &y in &[1e-6, 0.1, 1.0, 3.5, 50.0] {
            let v = softplus_inverse(y);
            assert!((softplus_scalar(v) - y).abs() <= 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn kl_of_equal_tensors_is_zero() {
        let x = Tensor::from_vec(&[2, 2], vec![0.5, 1.0, 2.0, 3.5]).unwrap();
        assert!(kl_divergence(&x, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_scalar_example() {
        let x = Tensor::scalar(1.0);
        let xhat = Tensor::scalar(2.0);
        let expect = 1.0 * (1.0f64 / 2.0).ln() - 1.0 + 2.0;
        assert!((kl_divergence(&x, &xhat).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.3068528194400547).abs() < 1e-15);
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = Tensor::from_fn(&[3, 4], |_| rng.gen_range(0.0..2.0));
            let xhat = Tensor::from_fn(&[3, 4], |_| rng.gen_range(0.01..2.0));
            assert!(kl_divergence(&x, &xhat).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn kl_zero_x_contributes_xhat_only() {
        let x = Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap();
        let xhat = Tensor::from_vec(&[2], vec![0.25, 0.5]).unwrap();
        assert!((kl_divergence(&x, &xhat).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn kl_rejects_negative_entries() {
        let x = Tensor::from_vec(&[1], vec![-0.1]).unwrap();
        let xhat = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        assert!(kl_divergence(&x, &xhat).is_err());
        assert!(kl_divergence(&xhat, &x).is_err());
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(&[3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transpose_variants_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&[4, 3], &mut rng);
        let b = random_tensor(&[5, 3], &mut rng);
        let nt = matmul_nt(&a, &b);
        // Reference through explicit transpose.
        let bt = Tensor::from_fn(&[3, 5], |i| b.at2(i % 5, i / 5));
        let expect = matmul(&a, &bt).unwrap();
        for (x, y) in nt.data().iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        let c = random_tensor(&[4, 6], &mut rng);
        let tn = matmul_tn(&a, &c);
        let at = Tensor::from_fn(&[3, 4], |i| a.at2(i % 4, i / 4));
        let expect = matmul(&at, &c).unwrap();
        for (x, y) in tn.data().iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
