//! Separation scoring: SDR/SIR/SAR from an orthogonal-projection
//! decomposition of the estimate against the true sources, plus the median
//! and inter-quartile summary used for reporting.
//!
//! This is the zero-lag variant: the target and interference spaces are
//! spanned by the raw source signals with no allowance for time-invariant
//! distortion filters, so absolute numbers differ from toolbox outputs that
//! permit a filter.

use crate::dsp::AudioSignal;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Error energies below this fraction of the reference energy count as zero
/// and yield +inf ratios.
const ZERO_ENERGY_REL: f64 = 1e-20;

/// Scores of one separated source, in dB (+inf for perfect components).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BssMetrics {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
    pub source_index: usize,
}

/// The projection decomposition of an estimate: the part aligned with the
/// true source, the part explained by the other sources, and the rest.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub s_target: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy(v: &[f64]) -> f64 {
    dot(v, v)
}

/// Solves the small symmetric system G a = c by Gaussian elimination with
/// partial pivoting. G is n x n row-major.
fn solve(mut g: Vec<f64>, mut c: Vec<f64>) -> Result<Vec<f64>> {
    let n = c.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| g[a * n + col].abs().total_cmp(&g[b * n + col].abs()))
            .unwrap();
        if g[pivot * n + col].abs() < 1e-300 {
            return Err(Error::invalid(
                "bss_eval: targets are linearly dependent",
            ));
        }
        if pivot != col {
            for j in 0..n {
                g.swap(col * n + j, pivot * n + j);
            }
            c.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = g[row * n + col] / g[col * n + col];
            for j in col..n {
                g[row * n + j] -= factor * g[col * n + j];
            }
            c[row] -= factor * c[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = c[row];
        for j in row + 1..n {
            acc -= g[row * n + j] * x[j];
        }
        x[row] = acc / g[row * n + row];
    }
    Ok(x)
}

/// Decomposes `estimate` into target/interference/artifact components with
/// respect to `targets[target_index]`.
pub fn decompose(
    estimate: &AudioSignal,
    targets: &[AudioSignal],
    target_index: usize,
) -> Result<Decomposition> {
    if targets.is_empty() || target_index >= targets.len() {
        return Err(Error::invalid("bss_eval: bad target index"));
    }
    let len = estimate.len();
    for t in targets {
        if t.len() != len {
            return Err(Error::shape(format!(
                "bss_eval: estimate has {} samples, target has {}",
                len,
                t.len()
            )));
        }
    }
    let est = estimate.samples();
    let s = targets[target_index].samples();
    let s_energy = energy(s);
    if s_energy == 0.0 {
        return Err(Error::invalid("bss_eval: target signal is silent"));
    }

    // s_target: projection of the estimate onto the true source.
    let alpha = dot(est, s) / s_energy;
    let s_target: Vec<f64> = s.iter().map(|&v| alpha * v).collect();

    // Projection onto the span of all targets via the Gram system.
    let n = targets.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = dot(targets[i].samples(), targets[j].samples());
        }
    }
    let rhs: Vec<f64> = targets.iter().map(|t| dot(est, t.samples())).collect();
    let coeffs = solve(gram, rhs)?;

    let mut projection = vec![0.0; len];
    for (coeff, t) in coeffs.iter().zip(targets) {
        for (p, &v) in projection.iter_mut().zip(t.samples()) {
            *p += coeff * v;
        }
    }

    let e_interf: Vec<f64> = projection
        .iter()
        .zip(&s_target)
        .map(|(p, t)| p - t)
        .collect();
    let e_artif: Vec<f64> = est
        .iter()
        .zip(&projection)
        .map(|(e, p)| e - p)
        .collect();

    Ok(Decomposition {
        s_target,
        e_interf,
        e_artif,
    })
}

fn ratio_db(signal_energy: f64, error_energy: f64) -> f64 {
    if error_energy <= ZERO_ENERGY_REL * signal_energy.max(1e-300) {
        f64::INFINITY
    } else {
        10.0 * (signal_energy / error_energy).log10()
    }
}

/// SDR/SIR/SAR of `estimate` against the true source `targets[target_index]`,
/// with the other targets defining the interference space.
pub fn bss_eval(
    estimate: &AudioSignal,
    targets: &[AudioSignal],
    target_index: usize,
) -> Result<BssMetrics> {
    let d = decompose(estimate, targets, target_index)?;
    let target_energy = energy(&d.s_target);
    let interf_energy = energy(&d.e_interf);
    let artif_energy = energy(&d.e_artif);
    let noise: Vec<f64> = d
        .e_interf
        .iter()
        .zip(&d.e_artif)
        .map(|(a, b)| a + b)
        .collect();
    let wanted: Vec<f64> = d
        .s_target
        .iter()
        .zip(&d.e_interf)
        .map(|(a, b)| a + b)
        .collect();

    Ok(BssMetrics {
        sdr: ratio_db(target_energy, energy(&noise)),
        sir: ratio_db(target_energy, interf_energy),
        sar: ratio_db(energy(&wanted), artif_energy),
        source_index: target_index,
    })
}

/// Median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

/// Quantile by linear interpolation at rank (n-1)*p between order
/// statistics (the numpy default), pinned so summaries are reproducible
/// bit for bit.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (n - 1) as f64 * p;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Median and inter-quartile range of the values.
pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::invalid("summarize: empty input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(SummaryStats {
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        count: sorted.len(),
    })
}
