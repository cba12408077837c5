//! Spectrogram-like test image: a periodic train of rising and falling
//! diagonal stripes. Useful for inspecting what the decoder filters and
//! activations of a trained model look like.

use crate::autodiff::Tensor;
use crate::dsp::{FrameSpec, MagnitudeSpectrogram, Window};

/// Builds a `height` x `width` non-negative image whose columns repeat with
/// period `stripe_period`. Each period holds one rising and one falling
/// diagonal stripe (two pixels thick, slope two rows per column, peak value
/// 1). `seed` only shifts the phase of the pattern, so strict periodicity
/// along time is preserved.
pub fn make_toy_pattern(
    height: usize,
    width: usize,
    stripe_period: usize,
    seed: u64,
) -> MagnitudeSpectrogram {
    assert!(stripe_period >= 2, "stripe_period must be >= 2");
    assert!(height >= 2 && width >= 1);

    let stripe_cols = height.div_ceil(2); // slope 2 covers all rows
    let fall_start = stripe_period / 2;
    let phase = (seed % stripe_period as u64) as usize;

    let mut values = Tensor::zeros(&[height, width]);
    for t in 0..width {
        let s = (t + phase) % stripe_period;
        if s < stripe_cols {
            let r = 2 * s;
            values.set2(r.min(height - 1), t, 1.0);
            values.set2((r + 1).min(height - 1), t, 1.0);
        } else if s >= fall_start && s < fall_start + stripe_cols {
            let r = 2 * (s - fall_start);
            values.set2(height - 1 - r.min(height - 1), t, 1.0);
            values.set2(height - 1 - (r + 1).min(height - 1), t, 1.0);
        }
    }

    // Fabricated framing metadata: this image is never inverted to time.
    let frame = FrameSpec {
        frame_size: 2 * (height - 1),
        hop: ((height - 1) / 2).max(1),
        window: Window::Hann,
        sample_rate: 16_000,
    };
    MagnitudeSpectrogram::new(values, frame).expect("constructed pattern is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_range() {
        let pattern = make_toy_pattern(40, 350, 70, 0);
        assert_eq!(pattern.values().shape(), &[40, 350]);
        assert!(pattern
            .values()
            .data()
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
        assert!((pattern.values().max_abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn columns_repeat_with_the_period() {
        let period = 70;
        let pattern = make_toy_pattern(40, 350, period, 9);
        for t in 0..350 - period {
            for r in 0..40 {
                assert_eq!(
                    pattern.values().at2(r, t),
                    pattern.values().at2(r, t + period),
                    "column {t} row {r}"
                );
            }
        }
    }

    #[test]
    fn both_stripe_directions_are_present() {
        let pattern = make_toy_pattern(40, 350, 70, 0);
        // Rising stripes start at the top row, falling ones at the bottom.
        let top_active = (0..350).any(|t| pattern.values().at2(0, t) > 0.0);
        let bottom_active = (0..350).any(|t| pattern.values().at2(39, t) > 0.0);
        assert!(top_active && bottom_active);

        // A rising stripe moves down over time, a falling one up.
        let row_of = |t: usize| (0..40).find(|&r| pattern.values().at2(r, t) > 0.0);
        let mut saw_rising = false;
        let mut saw_falling = false;
        for t in 0..349 {
            if let (Some(a), Some(b)) = (row_of(t), row_of(t + 1)) {
                if b > a {
                    saw_rising = true;
                }
                if b < a {
                    saw_falling = true;
                }
            }
        }
        assert!(saw_rising && saw_falling);
    }

    #[test]
    fn seed_shifts_phase_only() {
        let a = make_toy_pattern(40, 350, 70, 0);
        let b = make_toy_pattern(40, 350, 70, 3);
        assert_ne!(a.values().data(), b.values().data());
        // Same multiset of columns, shifted.
        for t in 0..350 - 3 {
            for r in 0..40 {
                assert_eq!(a.values().at2(r, t + 3), b.values().at2(r, t));
            }
        }
    }
}
