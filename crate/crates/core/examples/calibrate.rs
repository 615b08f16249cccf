//! Scratch harness: training convergence and timing across seeds.

use lesion_core::nn::Mode;
use lesion_core::train::{holdout_set, train_trial, TrialConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let train_size: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(96);
    let batch: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(8);
    let seeds: Vec<u64> = args
        .get(5)
        .map(|s| s.split(',').map(|t| t.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![1, 2, 3]);

    let mut curves: Vec<Vec<f64>> = Vec::new();
    for seed in seeds {
        let cfg = TrialConfig {
            seed,
            train_set_size: train_size,
            epochs,
            learning_rate: lr,
            batch_size: batch,
            ..TrialConfig::default()
        };
        let t0 = Instant::now();
        let out = train_trial(&cfg).unwrap();
        let hist = &out.network.metadata().loss_history;
        let show: Vec<String> = hist
            .iter()
            .enumerate()
            .filter(|(i, _)| i % (epochs / 10).max(1) == 0 || *i == hist.len() - 1)
            .map(|(i, l)| format!("{i}:{l:.4}"))
            .collect();
        let holdout = holdout_set(seed, cfg.holdout_size);
        let mut comp = [0.0f64; 3];
        for img in &holdout {
            let pred = out.network.forward(&img.pixels, Mode::Eval, None).unwrap();
            let (p, t) = (pred.components(), img.target.components());
            for c in 0..3 {
                comp[c] += (p[c] - t[c]).powi(2) / holdout.len() as f64;
            }
        }
        println!(
            "seed {seed}: {:>6.1}s holdout {:.5} (lon {:.4} lat {:.4} rot {:.4}) undertrained={} losses [{}]",
            t0.elapsed().as_secs_f64(),
            out.holdout_mse,
            comp[0],
            comp[1],
            comp[2],
            out.undertrained,
            show.join(" ")
        );
        curves.push(hist.clone());
    }

    if curves.len() >= 2 {
        let epochs = curves[0].len();
        let medians: Vec<f64> = (0..epochs)
            .map(|e| {
                let mut col: Vec<f64> = curves.iter().map(|c| c[e]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                col[col.len() / 2]
            })
            .collect();
        let mut violations = 0;
        let mut worst = 0.0f64;
        for e in 1..epochs {
            if medians[e] > medians[e - 1] {
                violations += 1;
                worst = worst.max(medians[e] - medians[e - 1]);
                println!("  median rise at epoch {e}: {:.5} -> {:.5}", medians[e - 1], medians[e]);
            }
        }
        println!("median monotonicity: {violations} violations, worst rise {worst:.6}");
    }
}
