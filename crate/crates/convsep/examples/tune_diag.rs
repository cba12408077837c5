use convsep::dsp::{masked_resynthesis, split, stft, AudioSignal, Window};
use convsep::metrics::bss_eval;

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
    let test1 = comb(sr, 3.0, &partials1, env1, 33);
    let test2 = comb(sr, 3.0, &partials2, env2, 44);

    let scale = test1.rms() / test2.rms();
    let s2v: Vec<f64> = test2.samples().iter().map(|v| v * scale).collect();
    let mixv: Vec<f64> = test1.samples().iter().zip(&s2v).map(|(a, b)| a + b).collect();
    let mixture_sig = AudioSignal::new(mixv, sr).unwrap();
    let s2 = AudioSignal::new(s2v, sr).unwrap();

    let mixture = stft(&mixture_sig, 1024, 256, Window::Hann).unwrap();
    // Oracle masks from the true clean-source magnitudes.
    let (m1, _) = split(&stft(&test1, 1024, 256, Window::Hann).unwrap());
    let (m2, _) = split(&stft(&s2, 1024, 256, Window::Hann).unwrap());
    let outs = masked_resynthesis(&[m1, m2], &mixture).unwrap();

    let out_len = outs[0].len();
    let targets = vec![
        test1.truncated(out_len).unwrap(),
        s2.truncated(out_len).unwrap(),
    ];
    for i in 0..2 {
        let m = bss_eval(&outs[i], &targets, i).unwrap();
        println!("oracle src{i}: SDR {:.1} SIR {:.1} SAR {:.1}", m.sdr, m.sir, m.sar);
        // correlation of estimate with its target
        let e = &outs[i];
        let t = &targets[i];
        let dot: f64 = e.samples().iter().zip(t.samples()).map(|(a, b)| a * b).sum();
        let ee: f64 = e.samples().iter().map(|v| v * v).sum();
        let tt: f64 = t.samples().iter().map(|v| v * v).sum();
        println!("  corr {:.4}, energy est {ee:.3} target {tt:.3}", dot / (ee * tt).sqrt());
    }
}
