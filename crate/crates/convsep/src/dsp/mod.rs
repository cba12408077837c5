//! Time-domain / time-frequency conversion and masked resynthesis.
//!
//! Every spectrogram carries its framing metadata so downstream consumers
//! never have to re-specify transform parameters.

mod stft;

pub use stft::{istft, stft};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub use num_complex::Complex64;

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
}

/// Framing metadata shared by all spectrogram types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_size: usize,
    pub hop: usize,
    pub window: Window,
    pub sample_rate: u32,
}

impl FrameSpec {
    /// One-sided bin count, frame_size/2 + 1.
    pub fn bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size < 2 || self.frame_size % 2 != 0 {
            return Err(Error::invalid(format!(
                "frame_size must be even and >= 2, got {}",
                self.frame_size
            )));
        }
        if self.hop == 0 || self.hop > self.frame_size {
            return Err(Error::invalid(format!(
                "hop must be in 1..={}, got {}",
                self.frame_size, self.hop
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        Ok(())
    }
}

/// A mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<AudioSignal> {
        if samples.is_empty() {
            return Err(Error::invalid("audio signal must be non-empty"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFinite("audio signal".to_string()));
        }
        Ok(AudioSignal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Shortened copy keeping the first `len` samples.
    pub fn truncated(&self, len: usize) -> Result<AudioSignal> {
        AudioSignal::new(self.samples[..len.min(self.samples.len())].to_vec(), self.sample_rate)
    }
}

/// One-sided complex spectrogram, bins x frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Vec<Complex64>,
    frames: usize,
    frame: FrameSpec,
}

impl ComplexSpectrogram {
    pub fn new(data: Vec<Complex64>, frames: usize, frame: FrameSpec) -> Result<ComplexSpectrogram> {
        frame.validate()?;
        let bins = frame.bins();
        if data.len() != bins * frames {
            return Err(Error::shape(format!(
                "complex spectrogram: {} values for {} bins x {} frames",
                data.len(),
                bins,
                frames
            )));
        }
        if !data.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite("complex spectrogram".to_string()));
        }
        Ok(ComplexSpectrogram {
            data,
            frames,
            frame,
        })
    }

    pub fn bins(&self) -> usize {
        self.frame.bins()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn at(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }
}

/// Non-negative magnitude plane of a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    values: Tensor,
    frame: FrameSpec,
}

impl MagnitudeSpectrogram {
    pub fn new(values: Tensor, frame: FrameSpec) -> Result<MagnitudeSpectrogram> {
        frame.validate()?;
        if !values.is_matrix() || values.rows() != frame.bins() {
            return Err(Error::shape(format!(
                "magnitude spectrogram: shape {:?} does not match {} bins",
                values.shape(),
                frame.bins()
            )));
        }
        values.ensure_finite("magnitude spectrogram")?;
        if values.data().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("magnitude spectrogram has negative entries"));
        }
        Ok(MagnitudeSpectrogram { values, frame })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }

    pub fn bins(&self) -> usize {
        self.values.rows()
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }
}

/// Per-bin phase angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    angles: Tensor,
}

impl PhaseMatrix {
    pub fn new(angles: Tensor) -> Result<PhaseMatrix> {
        angles.ensure_finite("phase matrix")?;
        if !angles.is_matrix() {
            return Err(Error::shape("phase matrix must be rank 2".to_string()));
        }
        Ok(PhaseMatrix { angles })
    }

    pub fn angles(&self) -> &Tensor {
        &self.angles
    }
}

/// Splits a complex spectrogram into magnitude and phase. A zero bin gets
/// phase 0 by convention.
pub fn split(spec: &ComplexSpectrogram) -> (MagnitudeSpectrogram, PhaseMatrix) {
    let (bins, frames) = (spec.bins(), spec.frames());
    let mags = Tensor::from_fn(&[bins, frames], |i| spec.data()[i].norm());
    let angles = Tensor::from_fn(&[bins, frames], |i| {
        let c = spec.data()[i];
        if c.re == 0.0 && c.im == 0.0 {
            0.0
        } else {
            c.arg()
        }
    });
    (
        MagnitudeSpectrogram {
            values: mags,
            frame: *spec.frame(),
        },
        PhaseMatrix { angles },
    )
}

/// Recombines magnitude and phase into a complex spectrogram.
pub fn merge(mag: &MagnitudeSpectrogram, phase: &PhaseMatrix) -> Result<ComplexSpectrogram> {
    if !mag.values().same_shape(phase.angles()) {
        return Err(Error::shape(format!(
            "merge: magnitude {:?} vs phase {:?}",
            mag.values().shape(),
            phase.angles().shape()
        )));
    }
    let data = mag
        .values()
        .data()
        .iter()
        .zip(phase.angles().data())
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    ComplexSpectrogram::new(data, mag.frames(), *mag.frame())
}

/// Per-source ratio masks mag_i / sum(mags). The masks partition unity
/// exactly: the last mask is one minus the others, and bins where the
/// magnitudes sum to zero split evenly.
pub fn ratio_masks(source_mags: &[MagnitudeSpectrogram]) -> Result<Vec<Tensor>> {
    if source_mags.len() < 2 {
        return Err(Error::invalid("ratio_masks needs at least 2 sources"));
    }
    let shape = source_mags[0].values().shape().to_vec();
    for mag in &source_mags[1..] {
        if mag.values().shape() != shape {
            return Err(Error::shape(format!(
                "mask source {:?} vs {:?}",
                mag.values().shape(),
                shape
            )));
        }
    }
    let n = source_mags.len();
    let len = source_mags[0].values().len();
    let mut masks = vec![Tensor::zeros(&shape); n];
    for i in 0..len {
        let denom: f64 = source_mags.iter().map(|m| m.values().data()[i]).sum();
        // The last mask is one minus the left-to-right partial sum, so the
        // masks sum to exactly 1 when added in source order.
        let mut partial = 0.0;
        for s in 0..n - 1 {
            let m = if denom == 0.0 {
                1.0 / n as f64
            } else {
                source_mags[s].values().data()[i] / denom
            };
            masks[s].data_mut()[i] = m;
            partial += m;
        }
        masks[n - 1].data_mut()[i] = 1.0 - partial;
    }
    Ok(masks)
}

/// Applies per-source ratio masks built from the given magnitudes to the
/// complex mixture and inverts each masked spectrogram.
pub fn masked_resynthesis(
    source_mags: &[MagnitudeSpectrogram],
    mixture: &ComplexSpectrogram,
) -> Result<Vec<AudioSignal>> {
    let (bins, frames) = (mixture.bins(), mixture.frames());
    for mag in source_mags {
        if mag.bins() != bins || mag.frames() != frames {
            return Err(Error::shape(format!(
                "mask source {}x{} vs mixture {}x{}",
                mag.bins(),
                mag.frames(),
                bins,
                frames
            )));
        }
    }
    let masks = ratio_masks(source_mags)?;
    let mut signals = Vec::with_capacity(masks.len());
    for mask in &masks {
        let data = mixture
            .data()
            .iter()
            .zip(mask.data())
            .map(|(c, &m)| c * m)
            .collect();
        let masked = ComplexSpectrogram::new(data, frames, *mixture.frame())?;
        signals.push(istft(&masked)?);
    }
    Ok(signals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame_spec() -> FrameSpec {
        FrameSpec {
            frame_size: 64,
            hop: 16,
            window: Window::Hann,
            sample_rate: 8000,
        }
    }

    fn random_spec(seed: u64, frames: usize) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = frame_spec();
        let data = (0..spec.bins() * frames)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexSpectrogram::new(data, frames, spec).unwrap()
    }

    #[test]
    fn split_reference_values() {
        let spec = frame_spec();
        let mut data = vec![Complex64::new(0.0, 0.0); spec.bins()];
        data[0] = Complex64::new(3.0, 4.0);
        let cs = ComplexSpectrogram::new(data, 1, spec).unwrap();
        let (mag, phase) = split(&cs);
        assert!((mag.values().data()[0] - 5.0).abs() < 1e-15);
        assert!((phase.angles().data()[0] - 4.0f64.atan2(3.0)).abs() < 1e-15);
        // zero bin: magnitude 0, phase 0 by convention
        assert_eq!(mag.values().data()[1], 0.0);
        assert_eq!(phase.angles().data()[1], 0.0);
    }

    #[test]
    fn merge_inverts_split() {
        let cs = random_spec(1, 5);
        let (mag, phase) = split(&cs);
        let back = merge(&mag, &phase).unwrap();
        let max_err = cs
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-12);
    }

    #[test]
    fn split_never_emits_negative_magnitudes() {
        let (mag, _) = split(&random_spec(2, 8));
        assert!(mag.values().data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn equal_magnitudes_split_mixture_in_half() {
        let mixture = random_spec(3, 6);
        let (mag, _) = split(&mixture);
        let halves = masked_resynthesis(&[mag.clone(), mag], &mixture).unwrap();
        let full = istft(&mixture).unwrap();
        for out in &halves {
            for (a, b) in out.samples().iter().zip(full.samples()) {
                assert!((a - b / 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_competitor_gives_full_mixture() {
        let mixture = random_spec(4, 6);
        let (mag, _) = split(&mixture);
        let zero = MagnitudeSpectrogram::new(
            Tensor::zeros(&[mixture.bins(), mixture.frames()]),
            *mixture.frame(),
        )
        .unwrap();
        let outs = masked_resynthesis(&[mag, zero], &mixture).unwrap();
        let full = istft(&mixture).unwrap();
        for (a, b) in outs[0].samples().iter().zip(full.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_outputs_sum_to_mixture_inverse() {
        let mixture = random_spec(5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shape = [mixture.bins(), mixture.frames()];
        let m1 = MagnitudeSpectrogram::new(
            Tensor::from_fn(&shape, |_| rng.gen_range(0.0..2.0)),
            *mixture.frame(),
        )
        .unwrap();
        let m2 = MagnitudeSpectrogram::new(
            Tensor::from_fn(&shape, |_| rng.gen_range(0.0..2.0)),
            *mixture.frame(),
        )
        .unwrap();
        let outs = masked_resynthesis(&[m1, m2], &mixture).unwrap();
        let full = istft(&mixture).unwrap();
        for n in 0..full.samples().len() {
            let sum = outs[0].samples()[n] + outs[1].samples()[n];
            assert!((sum - full.samples()[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn mask_shape_mismatch_is_rejected() {
        let mixture = random_spec(7, 6);
        let bad = MagnitudeSpectrogram::new(
            Tensor::zeros(&[mixture.bins(), 3]),
            *mixture.frame(),
        )
        .unwrap();
        let (mag, _) = split(&mixture);
        assert!(masked_resynthesis(&[mag, bad], &mixture).is_err());
    }
}
