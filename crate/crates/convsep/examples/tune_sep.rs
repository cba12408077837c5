use convsep::dsp::{stft, AudioSignal, Window};
use convsep::metrics::bss_eval;
use convsep::model::{train, ModelConfig, Variant};
use convsep::separation::{separate, SeparationConfig};
use std::time::Instant;

fn comb(sr: u32, dur: f64, partials: &[f64], env: impl Fn(f64) -> f64, seed: u64) -> AudioSignal {
    let n = (sr as f64 * dur) as usize;
    let mut phases = Vec::new();
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    for _ in partials {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        phases.push((state % 10_000) as f64 / 10_000.0 * std::f64::consts::TAU);
    }
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let tone: f64 = partials
                .iter()
                .zip(&phases)
                .map(|(&f, &p)| (std::f64::consts::TAU * f * t + p).sin())
                .sum();
            0.5 * env(t) * tone / partials.len() as f64
        })
        .collect();
    AudioSignal::new(samples, sr).unwrap()
}

fn main() {
    let sr = 16_000;
    let partials1: Vec<f64> = (0..10).map(|k| 200.0 + 400.0 * k as f64).collect();
    let partials2: Vec<f64> = (0..10).map(|k| 400.0 + 400.0 * k as f64).collect();
    let env1 = |t: f64| 0.55 + 0.45 * (std::f64::consts::TAU * 1.3 * t).sin();
    let env2 = |t: f64| {
        let phase = (t * 3.7).fract();
        let bump = 0.5 - 0.5 * (std::f64::consts::TAU * phase).cos();
        bump * bump
    };

    // Separate training takes (different phase seeds) and test takes.
    let train1 = comb(sr, 3.0, &partials1, env1, 11);
    let train2 = comb(sr, 3.0, &partials2, env2, 22);
    let test1 = comb(sr, 3.0, &partials1, env1, 33);
    let test2 = comb(sr, 3.0, &partials2, env2, 44);

    // 0 dB mix.
    let scale = test1.rms() / test2.rms();
    let s2: Vec<f64> = test2.samples().iter().map(|v| v * scale).collect();
    let mix: Vec<f64> = test1
        .samples()
        .iter()
        .zip(&s2)
        .map(|(a, b)| a + b)
        .collect();
    let mixture_sig = AudioSignal::new(mix, sr).unwrap();
    let s2 = AudioSignal::new(s2, sr).unwrap();

    for (train_iters, sep_iters) in [(150usize, 200usize), (300, 400)] {
        let start = Instant::now();
        let mut models = Vec::new();
        for (i, src) in [&train1, &train2].iter().enumerate() {
            let spec = stft(src, 1024, 256, Window::Hann).unwrap();
            let (mag, _) = convsep::dsp::split(&spec);
            let mut cfg = ModelConfig::new(Variant::Ccae, 20, 8, 513);
            cfg.train.iterations = train_iters;
            cfg.train.seed = i as u64;
            let (model, report) = train(&cfg, &[mag]).unwrap();
            println!(
                "  model {i}: kl {:.1} -> {:.1}",
                report.trajectory.first().unwrap().kl,
                report.trajectory.last().unwrap().kl
            );
            models.push(model);
        }
        let t_train = start.elapsed().as_secs_f64();

        let mixture = stft(&mixture_sig, 1024, 256, Window::Hann).unwrap();
        let mut sep_cfg = SeparationConfig::default();
        sep_cfg.iterations = sep_iters;
        let result = separate(&models[0], &models[1], &mixture, &sep_cfg).unwrap();
        let t_all = start.elapsed().as_secs_f64();

        let out_len = result.signals[0].len();
        let targets = vec![
            test1.truncated(out_len).unwrap(),
            s2.truncated(out_len).unwrap(),
        ];
        let mix_est = mixture_sig.truncated(out_len).unwrap();
        for i in 0..2 {
            let est = bss_eval(&result.signals[i], &targets, i).unwrap();
            let base = bss_eval(&mix_est, &targets, i).unwrap();
            println!(
                "  src{i}: SIR {:.1} (base {:.1}, gain {:+.1}) SDR {:.1} SAR {:.1}",
                est.sir,
                base.sir,
                est.sir - base.sir,
                est.sdr,
                est.sar
            );
        }
        println!(
            "train_iters={train_iters} sep_iters={sep_iters}: loss {:.1}->{:.1}, train {t_train:.0}s total {t_all:.0}s",
            result.trajectory.first().unwrap(),
            result.trajectory.last().unwrap()
        );
    }
}
