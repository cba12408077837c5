use convsep::dsp::{split, stft, AudioSignal, Window};
use convsep::metrics::{bss_eval, summarize};
use convsep::model::{train, ModelConfig, Variant};
use convsep::separation::{separate, SeparationConfig};
use std::time::Instant;

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

/// Private partial grid per speaker plus three shared partials that carry
/// only the speaker's envelope; phases and per-partial gains vary by seed.
fn utterance(sr: u32, dur: f64, style: usize, seed: u64) -> AudioSignal {
    let mut rng = seed.wrapping_mul(1000003).wrapping_add(style as u64 * 7919);
    let private: Vec<f64> = (0..6)
        .map(|k| if style == 0 { 200.0 } else { 400.0 } + 400.0 * k as f64)
        .collect();
    let shared = [2700.0, 3100.0, 3500.0];
    let mut partials: Vec<(f64, f64)> = private.iter().map(|&f| (f, 1.0)).collect();
    partials.extend(shared.iter().map(|&f| (f, 0.8)));
    let jitter: Vec<f64> = (0..partials.len()).map(|_| 0.8 + 0.4 * unit(&mut rng)).collect();
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
            let tone: f64 = partials
                .iter()
                .zip(&phases)
                .zip(&jitter)
                .map(|(((f, a), p), j)| a * j * (std::f64::consts::TAU * f * t + p).sin())
                .sum();
            0.08 * env * tone
        })
        .collect();
    AudioSignal::new(samples, sr).unwrap()
}

fn main() {
    let sr = 16_000u32;
    let frame = 1024usize;
    let hop = 256usize;
    let dur = 1.0;
    let n_mix = 5;
    let k = 80;

    for variant in [Variant::Ccae, Variant::Ff] {
        let t0 = Instant::now();
        let mut sdrs = Vec::new();
        for mix_id in 0..n_mix {
            let base = 1000 * (mix_id as u64 + 1);
            let utts_a: Vec<AudioSignal> = (0..10).map(|u| utterance(sr, dur, 0, base + u)).collect();
            let utts_b: Vec<AudioSignal> = (0..10).map(|u| utterance(sr, dur, 1, base + 100 + u)).collect();
            let mut models = Vec::new();
            for utts in [&utts_a, &utts_b] {
                let corpus: Vec<_> = utts[..9]
                    .iter()
                    .map(|s| split(&stft(s, frame, hop, Window::Hann).unwrap()).0)
                    .collect();
                let mut cfg = ModelConfig::new(variant, k, 8, frame / 2 + 1);
                cfg.train.iterations = 150;
                cfg.train.seed = base;
                let (model, _) = train(&cfg, &corpus).unwrap();
                models.push(model);
            }
            let s1 = &utts_a[9];
            let scale = s1.rms() / utts_b[9].rms();
            let s2v: Vec<f64> = utts_b[9].samples().iter().map(|v| v * scale).collect();
            let mixv: Vec<f64> = s1.samples().iter().zip(&s2v).map(|(a, b)| a + b).collect();
            let mixture_sig = AudioSignal::new(mixv, sr).unwrap();
            let mixture = stft(&mixture_sig, frame, hop, Window::Hann).unwrap();
            let mut sep_cfg = SeparationConfig::default();
            sep_cfg.iterations = 400;
            sep_cfg.optimizer.learning_rate = 0.005;
            let result = separate(&models[0], &models[1], &mixture, &sep_cfg).unwrap();
            let out_len = result.signals[0].len();
            let targets = vec![
                s1.truncated(out_len).unwrap(),
                AudioSignal::new(s2v, sr).unwrap().truncated(out_len).unwrap(),
            ];
            for i in 0..2 {
                let m = bss_eval(&result.signals[i], &targets, i).unwrap();
                sdrs.push(m.sdr);
            }
        }
        let s = summarize(&sdrs).unwrap();
        println!(
            "{:?}: median SDR {:.2} (q1 {:.2} q3 {:.2}) rows {:?}, {:.0}s",
            variant, s.median, s.q1, s.q3,
            sdrs.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
            t0.elapsed().as_secs_f64()
        );
    }
}
