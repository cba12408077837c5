//! 0 dB mixture construction: the second source is rescaled to the first
//! source's RMS, so both ground-truth references carry equal energy.

use crate::error::{CliError, Result};
use convsep::dsp::AudioSignal;

/// Truncates both signals to the shorter length, rescales `s2` to match the
/// RMS of `s1`, and returns (mixture, s1, scaled s2). The returned scaled
/// signals are exactly the summands of the mixture and serve as metric
/// ground truth.
pub fn mix_at_0db(
    s1: &AudioSignal,
    s2: &AudioSignal,
) -> Result<(AudioSignal, AudioSignal, AudioSignal)> {
    if s1.sample_rate() != s2.sample_rate() {
        return Err(CliError::data(format!(
            "sample rates differ: {} vs {}",
            s1.sample_rate(),
            s2.sample_rate()
        )));
    }
    let len = s1.len().min(s2.len());
    let a = s1.truncated(len).map_err(CliError::from)?;
    let b = s2.truncated(len).map_err(CliError::from)?;
    let (rms_a, rms_b) = (a.rms(), b.rms());
    if rms_a == 0.0 || rms_b == 0.0 {
        return Err(CliError::data("cannot mix a silent signal at 0 dB"));
    }
    let gain = rms_a / rms_b;
    let scaled: Vec<f64> = b.samples().iter().map(|v| v * gain).collect();
    let mixture: Vec<f64> = a
        .samples()
        .iter()
        .zip(&scaled)
        .map(|(x, y)| x + y)
        .collect();
    let rate = s1.sample_rate();
    Ok((
        AudioSignal::new(mixture, rate).map_err(CliError::from)?,
        a,
        AudioSignal::new(scaled, rate).map_err(CliError::from)?,
    ))
}
