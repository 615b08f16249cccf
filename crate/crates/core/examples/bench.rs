//! Scratch harness: forward/backward throughput of the reference net.

use lesion_core::nn::{Mode, Network, Tensor};
use lesion_core::train::{batch_loss_and_grad, training_set};
use std::time::Instant;

fn main() {
    let net = Network::reference(1, 0.0);
    let imgs = training_set(1, 16);
    let batch: Vec<(&Tensor, _)> = imgs.iter().map(|w| (&w.pixels, w.target)).collect();

    let t0 = Instant::now();
    let reps = 50;
    for _ in 0..reps {
        for (img, _) in &batch {
            net.forward(img, Mode::Eval, None).unwrap();
        }
    }
    let per_fwd = t0.elapsed().as_secs_f64() / (reps * batch.len()) as f64;
    println!("forward: {:.3} ms ({:.2} GFLOP/s)", per_fwd * 1e3, 21e-3 / per_fwd / 1e3 * 1e3);

    let t0 = Instant::now();
    let reps = 10;
    for _ in 0..reps {
        batch_loss_and_grad(&net, &batch, None).unwrap();
    }
    let per_item = t0.elapsed().as_secs_f64() / (reps * batch.len()) as f64;
    println!("fwd+bwd per sample (parallel batch): {:.3} ms", per_item * 1e3);
}
