//! Scratch harness: per-primitive timing on reference-net shapes.

use lesion_core::nn::Tensor;
use std::time::Instant;

fn time_it(label: &str, mut f: impl FnMut(), reps: usize) {
    let t0 = Instant::now();
    for _ in 0..reps {
        f();
    }
    println!("{label}: {:.3} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
}

fn main() {
    // conv2 shapes: 30ch 30x30 input, 15 filters 5x5 -> 26x26
    let input = Tensor::new(vec![30, 30, 30], (0..27000).map(|i| (i % 97) as f64 * 0.01).collect()).unwrap();
    let dout = Tensor::new(vec![15, 26, 26], (0..15 * 676).map(|i| (i % 89) as f64 * 0.01).collect()).unwrap();
    let weights: Vec<f64> = (0..15 * 30 * 25).map(|i| (i % 83) as f64 * 0.001).collect();
    let bias = vec![0.0; 15];

    time_it("conv2 fwd", || {
        std::hint::black_box(lesion_core::nn::bench_conv_forward(&input, 15, 30, 5, 5, &weights, &bias));
    }, 50);
    time_it("conv2 bwd (with dinput)", || {
        std::hint::black_box(lesion_core::nn::bench_conv_backward(&input, &dout, 15, 30, 5, 5, &weights, true));
    }, 50);
    time_it("conv2 bwd (no dinput)", || {
        std::hint::black_box(lesion_core::nn::bench_conv_backward(&input, &dout, 15, 30, 5, 5, &weights, false));
    }, 50);

    // conv1 shapes: 1ch 64x64, 30 filters 5x5 -> 60x60
    let input1 = Tensor::new(vec![1, 64, 64], (0..4096).map(|i| (i % 97) as f64 * 0.01).collect()).unwrap();
    let dout1 = Tensor::new(vec![30, 60, 60], (0..30 * 3600).map(|i| (i % 89) as f64 * 0.01).collect()).unwrap();
    let weights1: Vec<f64> = (0..30 * 25).map(|i| (i % 83) as f64 * 0.001).collect();
    let bias1 = vec![0.0; 30];
    time_it("conv1 fwd", || {
        std::hint::black_box(lesion_core::nn::bench_conv_forward(&input1, 30, 1, 5, 5, &weights1, &bias1));
    }, 50);
    time_it("conv1 bwd (no dinput)", || {
        std::hint::black_box(lesion_core::nn::bench_conv_backward(&input1, &dout1, 30, 1, 5, 5, &weights1, false));
    }, 50);

    // dense 250->400
    let dinput = vec![0.5; 250];
    let dw: Vec<f64> = (0..400 * 250).map(|i| (i % 83) as f64 * 0.001).collect();
    let db = vec![0.0; 400];
    time_it("dense1 fwd", || {
        std::hint::black_box(lesion_core::nn::bench_dense_forward(&dinput, 400, 250, &dw, &db));
    }, 200);
    let g400 = vec![0.1; 400];
    time_it("dense1 bwd", || {
        std::hint::black_box(lesion_core::nn::bench_dense_backward(&dinput, &g400, 400, 250, &dw));
    }, 200);
}
