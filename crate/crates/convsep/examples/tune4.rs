use convsep::dsp::{masked_resynthesis, split, stft, AudioSignal, Window};
use convsep::metrics::bss_eval;
use convsep::model::{train, ModelConfig, Variant};
use convsep::separation::{separate, SeparationConfig};

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

fn utterance(sr: u32, dur: f64, style: usize, seed: u64, shared: bool, jitter: bool) -> AudioSignal {
    let mut rng = seed.wrapping_mul(1000003).wrapping_add(style as u64 * 7919);
    let offset = if style == 0 { 200.0 } else { 400.0 };
    let mut partials: Vec<(f64, f64)> = (0..6).map(|k| (offset + 400.0 * k as f64, 1.0)).collect();
    if shared {
        partials.extend([2700.0, 3100.0, 3500.0].iter().map(|&f| (f, 0.8)));
    }
    if jitter {
        for p in &mut partials { p.1 *= 0.8 + 0.4 * unit(&mut rng); }
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
    for (name, shared, jitter, train_iters, sep_iters, sep_lr) in [
        ("A: v3 train400 sep800", true, true, 400usize, 800usize, 0.005f64),
        ("B: no-shared", false, true, 150, 400, 0.005),
        ("C: no-shared no-jitter", false, false, 150, 400, 0.005),
        ("D: v3 base", true, true, 150, 400, 0.005),
    ] {
        let base = 1000u64;
        let utts_a: Vec<AudioSignal> = (0..10).map(|u| utterance(sr, 1.0, 0, base + u, shared, jitter)).collect();
        let utts_b: Vec<AudioSignal> = (0..10).map(|u| utterance(sr, 1.0, 1, base + 100 + u, shared, jitter)).collect();
        let mut models = Vec::new();
        let mut kls = Vec::new();
        for utts in [&utts_a, &utts_b] {
            let corpus: Vec<_> = utts[..9].iter()
                .map(|s| split(&stft(s, frame, hop, Window::Hann).unwrap()).0).collect();
            let mut cfg = ModelConfig::new(Variant::Ccae, 80, 8, frame / 2 + 1);
            cfg.train.iterations = train_iters;
            cfg.train.seed = base;
            let (model, report) = train(&cfg, &corpus).unwrap();
            kls.push((report.trajectory.first().unwrap().kl, report.trajectory.last().unwrap().kl));
            models.push(model);
        }
        let s1 = &utts_a[9];
        let scale = s1.rms() / utts_b[9].rms();
        let s2v: Vec<f64> = utts_b[9].samples().iter().map(|v| v * scale).collect();
        let mixv: Vec<f64> = s1.samples().iter().zip(&s2v).map(|(a, b)| a + b).collect();
        let mixture_sig = AudioSignal::new(mixv, sr).unwrap();
        let s2sig = AudioSignal::new(s2v, sr).unwrap();
        let mixture = stft(&mixture_sig, frame, hop, Window::Hann).unwrap();

        // Oracle-mask reference.
        let (om1, _) = split(&stft(s1, frame, hop, Window::Hann).unwrap());
        let (om2, _) = split(&stft(&s2sig, frame, hop, Window::Hann).unwrap());
        let oracle_outs = masked_resynthesis(&[om1, om2], &mixture).unwrap();
        let out_len = oracle_outs[0].len();
        let targets = vec![s1.truncated(out_len).unwrap(), s2sig.truncated(out_len).unwrap()];
        let oracle0 = bss_eval(&oracle_outs[0], &targets, 0).unwrap();

        let mut sep_cfg = SeparationConfig::default();
        sep_cfg.iterations = sep_iters;
        sep_cfg.optimizer.learning_rate = sep_lr;
        let result = separate(&models[0], &models[1], &mixture, &sep_cfg).unwrap();
        let m0 = bss_eval(&result.signals[0], &targets, 0).unwrap();
        let m1 = bss_eval(&result.signals[1], &targets, 1).unwrap();
        println!(
            "{name}: oracle SDR {:.1} | model SDR [{:.1}, {:.1}] SIR [{:.1}, {:.1}] | train KL {:.0}->{:.0} / {:.0}->{:.0} | seploss {:.0}->{:.0}",
            oracle0.sdr, m0.sdr, m1.sdr, m0.sir, m1.sir,
            kls[0].0, kls[0].1, kls[1].0, kls[1].1,
            result.trajectory.first().unwrap(), result.trajectory.last().unwrap()
        );
    }
}
