use convsep::model::{make_toy_pattern, train, ModelConfig, Variant};
use std::time::Instant;

fn main() {
    let pattern = make_toy_pattern(40, 350, 70, 0);
    for (k, lambda, lr, iters) in [
        (2usize, 1e-4f64, 0.001f64, 5000usize),
        (2, 1e-3, 0.001, 5000),
        (3, 1e-3, 0.001, 5000),
        (2, 1e-3, 0.005, 5000),
    ] {
        let mut cfg = ModelConfig::new(Variant::Ccae, k, 36, 40);
        cfg.sparsity_weight = lambda;
        cfg.train.iterations = iters;
        cfg.train.optimizer.learning_rate = lr;
        cfg.train.seed = 0;
        let start = Instant::now();
        let (model, report) = train(&cfg, &[pattern.clone()]).unwrap();
        let kl0 = report.trajectory.first().unwrap().kl;
        let kl_end = report.trajectory.last().unwrap().kl;
        let (_, code) = convsep::model::forward(&model, &pattern).unwrap();
        let mut ratios = Vec::new();
        for row in 0..k {
            let r = code.values().row(row);
            let peak = r.iter().cloned().fold(0.0f64, f64::max);
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            ratios.push(peak / mean);
        }
        println!(
            "K={k} lambda={lambda} lr={lr}: kl {kl0:.1} -> {kl_end:.3} ({:.2}%) peak/mean {:?} wall {:.1}s",
            100.0 * kl_end / kl0,
            ratios.iter().map(|r| (r * 10.0).round() / 10.0).collect::<Vec<_>>(),
            start.elapsed().as_secs_f64()
        );
    }
}
