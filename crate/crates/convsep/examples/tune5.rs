use convsep::dsp::{masked_resynthesis, split, stft, AudioSignal, Window};
use convsep::metrics::bss_eval;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
fn unit(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 / (1u64 << 53) as f64
}

fn utterance(sr: u32, dur: f64, style: usize, seed: u64, shared: bool) -> AudioSignal {
    let mut rng = seed.wrapping_mul(1000003).wrapping_add(style as u64 * 7919);
    let offset = if style == 0 { 200.0 } else { 400.0 };
    let mut partials: Vec<(f64, f64)> = (0..6).map(|k| (offset + 400.0 * k as f64, 1.0)).collect();
    if shared {
        partials.extend([2700.0, 3100.0, 3500.0].iter().map(|&f| (f, 0.8)));
    }
    let phases: Vec<f64> = (0..partials.len()).map(|_| unit(&mut rng) * std::f64::consts::TAU).collect();
    let am_rate = if style == 0 { 1.0 + 0.8 * unit(&mut rng) } else { 3.0 + 2.0 * unit(&mut rng) };
    let n = (sr as f64 * dur) as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let env = if style == 0 {
                0.6 + 0.4 * (std::f64::consts::TAU * am_rate * t).sin()
            } else {
                let b = 0.5 - 0.5 * (std::f64::consts::TAU * (t * am_rate).fract()).cos();
                b * b
            };
            let tone: f64 = partials.iter().zip(&phases)
                .map(|((f, a), p)| a * (std::f64::consts::TAU * f * t + p).sin()).sum();
            0.08 * env * tone
        })
        .collect();
    AudioSignal::new(samples, sr).unwrap()
}

fn main() {
    let sr = 16_000u32;
    let (frame, hop) = (1024usize, 256usize);
    for (name, dur, shared) in [
        ("1s no-shared", 1.0f64, false),
        ("3s no-shared", 3.0, false),
        ("3s shared", 3.0, true),
    ] {
        let s1 = utterance(sr, dur, 0, 1009, shared);
        let b = utterance(sr, dur, 1, 1109, shared);
        let scale = s1.rms() / b.rms();
        let s2v: Vec<f64> = b.samples().iter().map(|v| v * scale).collect();
        let mixv: Vec<f64> = s1.samples().iter().zip(&s2v).map(|(a, b)| a + b).collect();
        let mixture_sig = AudioSignal::new(mixv, sr).unwrap();
        let s2 = AudioSignal::new(s2v, sr).unwrap();
        let mixture = stft(&mixture_sig, frame, hop, Window::Hann).unwrap();
        let (om1, _) = split(&stft(&s1, frame, hop, Window::Hann).unwrap());
        let (om2, _) = split(&stft(&s2, frame, hop, Window::Hann).unwrap());
        let outs = masked_resynthesis(&[om1, om2], &mixture).unwrap();
        let out_len = outs[0].len();
        let targets = vec![s1.truncated(out_len).unwrap(), s2.truncated(out_len).unwrap()];
        let m0 = bss_eval(&outs[0], &targets, 0).unwrap();
        let m1 = bss_eval(&outs[1], &targets, 1).unwrap();
        // Error profile: interior vs edge energy of (estimate - target).
        let mut edge_err = 0.0;
        let mut int_err = 0.0;
        let mut tgt = 0.0;
        for i in 0..out_len {
            let d = outs[0].samples()[i] - targets[0].samples()[i];
            if i < frame || i >= out_len - frame { edge_err += d * d } else { int_err += d * d }
            tgt += targets[0].samples()[i] * targets[0].samples()[i];
        }
        println!(
            "{name}: oracle SDR [{:.1}, {:.1}] SIR [{:.1}, {:.1}] SAR [{:.1}, {:.1}] | err edge {:.3} interior {:.3} vs target {:.3} | scale {:.2}",
            m0.sdr, m1.sdr, m0.sir, m1.sir, m0.sar, m1.sar, edge_err, int_err, tgt, scale
        );
    }
}
