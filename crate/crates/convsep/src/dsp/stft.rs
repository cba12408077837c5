//! Forward/inverse short-time Fourier transform with weighted overlap-add.

use super::{AudioSignal, ComplexSpectrogram, FrameSpec, Window};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;

impl Window {
    /// Periodic window samples of the given length.
    pub fn samples(self, size: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..size)
                .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / size as f64).cos()))
                .collect(),
        }
    }
}

/// Short-time Fourier transform. Frames of `frame_size` samples are taken
/// every `hop` samples (trailing partial frame dropped), windowed, and
/// transformed; only the one-sided spectrum (frame_size/2 + 1 bins) is kept.
pub fn stft(
    signal: &AudioSignal,
    frame_size: usize,
    hop: usize,
    window: Window,
) -> Result<ComplexSpectrogram> {
    if frame_size < 2 || frame_size % 2 != 0 {
        return Err(Error::invalid(format!(
            "frame_size must be even and >= 2, got {frame_size}"
        )));
    }
    if hop == 0 || hop > frame_size {
        return Err(Error::invalid(format!(
            "hop must be in 1..={frame_size}, got {hop}"
        )));
    }
    let len = signal.samples().len();
    if len < frame_size {
        return Err(Error::SignalTooShort {
            needed: frame_size,
            got: len,
        });
    }
    let num_frames = 1 + (len - frame_size) / hop;
    let bins = frame_size / 2 + 1;
    let win = window.samples(frame_size);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(frame_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_size];

    // Column-major scratch per frame, stored row-major at the end.
    let mut data = vec![Complex64::new(0.0, 0.0); bins * num_frames];
    for frame in 0..num_frames {
        let start = frame * hop;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(signal.samples()[start + j] * win[j], 0.0);
        }
        fft.process(&mut buf);
        for (m, row) in data.chunks_mut(num_frames).enumerate().take(bins) {
            row[frame] = buf[m];
        }
    }

    let spec = FrameSpec {
        frame_size,
        hop,
        window,
        sample_rate: signal.sample_rate(),
    };
    ComplexSpectrogram::new(data, num_frames, spec)
}

/// Inverse transform by weighted overlap-add: each frame's inverse DFT is
/// windowed again, accumulated, and normalized by the window-square sum, so
/// an unmodified spectrogram reproduces the interior of the signal.
///
/// The normalizer is floored at a fraction of its interior value. Without
/// the floor, the outermost samples (covered by a single window tail with
/// w close to 0) divide by w^2 and blow any modification of the spectrogram
/// up by orders of magnitude; with it, edge deviations stay bounded at the
/// cost of attenuating the first and last few hundred samples of modified
/// spectra. Unmodified round trips are unaffected away from the edges.
pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioSignal> {
    let num_frames = spec.frames();
    if num_frames == 0 {
        return Err(Error::invalid("istft: spectrogram has zero frames"));
    }
    let frame_size = spec.frame().frame_size;
    let hop = spec.frame().hop;
    let bins = spec.bins();
    let win = spec.frame().window.samples(frame_size);

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(frame_size);

    let out_len = frame_size + (num_frames - 1) * hop;
    let mut acc = vec![0.0f64; out_len];
    let mut den = vec![0.0f64; out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_size];

    for frame in 0..num_frames {
        // Rebuild the full conjugate-symmetric spectrum.
        for m in 0..bins {
            buf[m] = spec.at(m, frame);
        }
        for m in 1..bins - 1 {
            buf[frame_size - m] = spec.at(m, frame).conj();
        }
        ifft.process(&mut buf);
        let start = frame * hop;
        let norm = 1.0 / frame_size as f64;
        for j in 0..frame_size {
            acc[start + j] += win[j] * buf[j].re * norm;
            den[start + j] += win[j] * win[j];
        }
    }

    let den_floor = 0.05 * den.iter().cloned().fold(0.0f64, f64::max);
    let samples: Vec<f64> = acc
        .iter()
        .zip(&den)
        .map(|(&a, &d)| if d > den_floor { a / d } else { a / den_floor.max(1e-12) })
        .collect();
    AudioSignal::new(samples, spec.frame().sample_rate)
}
