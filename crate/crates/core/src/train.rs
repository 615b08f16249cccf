//! Seeded behavior-cloning trainer.
//!
//! Networks are trained by plain mini-batch SGD to regress the ground-truth
//! steering targets of synthetic wire images (mean squared error over the
//! three heads). Every stochastic choice (weight init, data generation,
//! shuffling, dropout masks) derives from the trial seed, and per-sample
//! gradients are reduced in a fixed order, so identical configs produce
//! bit-identical weights regardless of thread count.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{self, Action, Layer, Mode, Network, Tensor};
use crate::rng::{mix, seeded_rng};
use crate::wire::{build_probe_set, generate_wire_image, ProbeSet, WireCategory, WireImage};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub seed: u64,
    pub train_set_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub holdout_size: usize,
    /// Held-out MSE below this counts as trained; otherwise the outcome is
    /// flagged undertrained.
    pub holdout_threshold: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            train_set_size: 96,
            epochs: 40,
            learning_rate: 0.05,
            batch_size: 8,
            dropout: 0.2,
            holdout_size: 24,
            holdout_threshold: 0.02,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_set_size == 0 || self.batch_size == 0 || self.holdout_size == 0 {
            return Err(Error::InvalidConfig("set and batch sizes must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        if !(self.dropout >= 0.0 && self.dropout < 1.0) {
            return Err(Error::InvalidConfig("dropout must be in [0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub final_train_loss: f64,
    pub holdout_mse: f64,
    pub undertrained: bool,
}

/// A set of independently trained networks sharing one probe set.
#[derive(Debug, Clone)]
pub struct TrialSet {
    pub trials: Vec<TrainOutcome>,
    pub probe: ProbeSet,
}

// ---------------------------------------------------------------------------
// Dropout masks
// ---------------------------------------------------------------------------

/// Pre-sampled inverted-dropout masks: one vector per dropout layer per
/// sample, holding 0.0 for dropped units and `1/(1-rate)` for survivors.
/// Sampling them up front keeps the loss a deterministic function of
/// (weights, batch, masks), which is what the finite-difference gradient
/// oracle needs.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    per_sample: Vec<Vec<Vec<f64>>>,
}

/// Widths of each dropout layer's output, in trunk order.
fn dropout_widths(net: &Network) -> Vec<usize> {
    let mut shape: Vec<usize> = net.input_shape().to_vec();
    let mut widths = Vec::new();
    for (i, layer) in net.trunk().iter().enumerate() {
        shape = layer
            .output_shape(&shape, i)
            .expect("validated network chains");
        if matches!(layer, Layer::Dropout { .. }) {
            widths.push(shape.iter().product());
        }
    }
    widths
}

pub fn sample_dropout_masks<R: Rng>(net: &Network, n_samples: usize, rng: &mut R) -> DropoutMasks {
    let widths = dropout_widths(net);
    let rates: Vec<f64> = net
        .trunk()
        .iter()
        .filter_map(|l| match l {
            Layer::Dropout { rate } => Some(*rate),
            _ => None,
        })
        .collect();
    let per_sample = (0..n_samples)
        .map(|_| {
            widths
                .iter()
                .zip(&rates)
                .map(|(&w, &rate)| {
                    let keep = 1.0 / (1.0 - rate);
                    (0..w)
                        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                        .collect()
                })
                .collect()
        })
        .collect();
    DropoutMasks { per_sample }
}

// ---------------------------------------------------------------------------
// Loss and gradients
// ---------------------------------------------------------------------------

/// Offsets of each parameterized trunk layer (weights, bias) and each head
/// inside the flat parameter vector of [`Network::params`].
struct ParamLayout {
    trunk: Vec<Option<(usize, usize)>>,
    heads: [(usize, usize); 3],
    total: usize,
}

fn param_layout(net: &Network) -> ParamLayout {
    let mut off = 0;
    let mut trunk = Vec::with_capacity(net.trunk().len());
    for layer in net.trunk() {
        match layer {
            Layer::Conv2D { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                let w_off = off;
                off += weights.len();
                let b_off = off;
                off += bias.len();
                trunk.push(Some((w_off, b_off)));
            }
            _ => trunk.push(None),
        }
    }
    let mut heads = [(0usize, 0usize); 3];
    for (h, head) in net.heads().iter().enumerate() {
        heads[h] = (off, off + head.weights.len());
        off += head.weights.len() + 1;
    }
    ParamLayout {
        trunk,
        heads,
        total: off,
    }
}

/// Mean squared error over the three action components for one prediction.
fn action_mse(pred: &Action, target: &Action) -> f64 {
    let p = pred.components();
    let t = target.components();
    p.iter()
        .zip(&t)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / 3.0
}

/// Forward pass with a tape, then backprop; returns this sample's loss and
/// its gradient in flat parameter order.
fn sample_loss_grad(
    net: &Network,
    layout: &ParamLayout,
    image: &Tensor,
    target: &Action,
    masks: Option<&[Vec<f64>]>,
) -> Result<(f64, Vec<f64>)> {
    let trunk = net.trunk();
    // tape[i] holds the input to layer i; tape[len] is the trunk output.
    let mut tape: Vec<Tensor> = Vec::with_capacity(trunk.len() + 1);
    tape.push(image.clone());
    let mut pool_argmax: Vec<Option<Vec<usize>>> = Vec::with_capacity(trunk.len());
    let mut dropout_slot = 0usize;

    for (i, layer) in trunk.iter().enumerate() {
        let input = &tape[i];
        let (out, argmax) = match layer {
            Layer::Conv2D {
                out_filters,
                in_channels,
                kh,
                kw,
                weights,
                bias,
            } => (
                nn::conv2d_forward(input, *out_filters, *in_channels, *kh, *kw, weights, bias),
                None,
            ),
            Layer::MaxPool2D { size, stride } => {
                let (out, idx) = nn::maxpool_forward(input, *size, *stride);
                (out, Some(idx))
            }
            Layer::Dense {
                out,
                input: n,
                weights,
                bias,
            } => (
                Tensor::new(vec![*out], nn::dense_forward(input.data(), *out, *n, weights, bias))?,
                None,
            ),
            Layer::ReLU => {
                let mut t = input.clone();
                for v in t.data_mut() {
                    *v = nn::relu(*v);
                }
                (t, None)
            }
            Layer::Tanh => {
                let mut t = input.clone();
                for v in t.data_mut() {
                    *v = v.tanh();
                }
                (t, None)
            }
            Layer::Sigmoid => {
                let mut t = input.clone();
                for v in t.data_mut() {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
                (t, None)
            }
            Layer::Flatten => (
                Tensor::new(vec![input.numel()], input.data().to_vec())?,
                None,
            ),
            Layer::Dropout { .. } => {
                let mut t = input.clone();
                if let Some(per_layer) = masks {
                    let mask = &per_layer[dropout_slot];
                    for (v, m) in t.data_mut().iter_mut().zip(mask) {
                        *v *= m;
                    }
                }
                dropout_slot += 1;
                (t, None)
            }
        };
        tape.push(out);
        pool_argmax.push(argmax);
    }

    let features = tape[trunk.len()].data();
    let mut grad = vec![0.0; layout.total];
    let mut dfeatures = vec![0.0; features.len()];
    let mut loss = 0.0;
    let t = target.components();
    for (h, head) in net.heads().iter().enumerate() {
        let mut z = head.bias;
        for (w, a) in head.weights.iter().zip(features) {
            z += w * a;
        }
        let y = head.activation.apply(z);
        let err = y - t[h];
        loss += err * err / 3.0;
        let dy = 2.0 * err / 3.0;
        let dz = match head.activation {
            nn::HeadActivation::Sigmoid => dy * y * (1.0 - y),
            nn::HeadActivation::Tanh => dy * (1.0 - y * y),
        };
        let (w_off, b_off) = layout.heads[h];
        for (i, (w, a)) in head.weights.iter().zip(features).enumerate() {
            grad[w_off + i] = dz * a;
            dfeatures[i] += dz * w;
        }
        grad[b_off] = dz;
    }

    // Backward through the trunk.
    let mut dout = Tensor::new(vec![features.len()], dfeatures)?;
    let mut dropout_slot_back = dropout_slot;
    for i in (0..trunk.len()).rev() {
        let input = &tape[i];
        dout = match &trunk[i] {
            Layer::Conv2D {
                out_filters,
                in_channels,
                kh,
                kw,
                weights,
                ..
            } => {
                let (dinput, dw, db) = nn::conv2d_backward(
                    input,
                    &dout,
                    *out_filters,
                    *in_channels,
                    *kh,
                    *kw,
                    weights,
                    i > 0, // the image itself needs no gradient
                );
                let (w_off, b_off) = layout.trunk[i].expect("conv has params");
                grad[w_off..w_off + dw.len()].copy_from_slice(&dw);
                grad[b_off..b_off + db.len()].copy_from_slice(&db);
                dinput
            }
            Layer::MaxPool2D { .. } => {
                let argmax = pool_argmax[i].as_ref().expect("pool recorded argmax");
                nn::maxpool_backward(&dout, argmax, input.shape())
            }
            Layer::Dense { out, input: n, weights, .. } => {
                let (dinput, dw, db) = nn::dense_backward(input.data(), dout.data(), *out, *n, weights);
                let (w_off, b_off) = layout.trunk[i].expect("dense has params");
                grad[w_off..w_off + dw.len()].copy_from_slice(&dw);
                grad[b_off..b_off + db.len()].copy_from_slice(&db);
                Tensor::new(input.shape().to_vec(), dinput)?
            }
            Layer::ReLU => {
                let mut d = dout;
                for (g, x) in d.data_mut().iter_mut().zip(input.data()) {
                    if *x <= 0.0 {
                        *g = 0.0;
                    }
                }
                d
            }
            Layer::Tanh => {
                let mut d = dout;
                for (g, x) in d.data_mut().iter_mut().zip(input.data()) {
                    let y = x.tanh();
                    *g *= 1.0 - y * y;
                }
                d
            }
            Layer::Sigmoid => {
                let mut d = dout;
                for (g, x) in d.data_mut().iter_mut().zip(input.data()) {
                    let y = 1.0 / (1.0 + (-*x).exp());
                    *g *= y * (1.0 - y);
                }
                d
            }
            Layer::Flatten => Tensor::new(input.shape().to_vec(), dout.into_data())?,
            Layer::Dropout { .. } => {
                dropout_slot_back -= 1;
                let mut d = dout;
                if let Some(per_layer) = masks {
                    let mask = &per_layer[dropout_slot_back];
                    for (g, m) in d.data_mut().iter_mut().zip(mask) {
                        *g *= m;
                    }
                }
                d
            }
        };
    }

    Ok((loss, grad))
}

/// Mean loss over a batch with the given (optional) dropout masks; the
/// deterministic function the gradient routine differentiates.
pub fn batch_loss(
    net: &Network,
    batch: &[(&Tensor, Action)],
    masks: Option<&DropoutMasks>,
) -> Result<f64> {
    let layout = param_layout(net);
    let mut total = 0.0;
    for (s, (image, target)) in batch.iter().enumerate() {
        let per_sample = masks.map(|m| m.per_sample[s].as_slice());
        // Reuse the tape path so train-mode loss and gradient agree exactly.
        let (loss, _) = sample_loss_grad(net, &layout, image, target, per_sample)?;
        total += loss;
    }
    Ok(total / batch.len() as f64)
}

/// Mean loss and its gradient with respect to every weight and bias, in
/// [`Network::params`] order. Per-sample gradients are computed in parallel
/// but reduced in batch order, so the result is thread-count independent.
pub fn batch_loss_and_grad(
    net: &Network,
    batch: &[(&Tensor, Action)],
    masks: Option<&DropoutMasks>,
) -> Result<(f64, Vec<f64>)> {
    let layout = param_layout(net);
    let per_sample: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .enumerate()
        .map(|(s, (image, target))| {
            let m = masks.map(|m| m.per_sample[s].as_slice());
            sample_loss_grad(net, &layout, image, target, m)
        })
        .collect();
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; layout.total];
    for r in per_sample {
        let (l, g) = r?;
        loss += l;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    loss *= inv;
    for v in &mut grad {
        *v *= inv;
    }
    Ok((loss, grad))
}

/// Evaluation-mode MSE over a labeled image set (dropout inert). Images are
/// evaluated in parallel but summed in set order.
pub fn eval_mse(net: &Network, set: &[WireImage]) -> Result<f64> {
    let losses: Vec<Result<f64>> = set
        .par_iter()
        .map(|img| {
            let pred = net.forward(&img.pixels, Mode::Eval, None)?;
            Ok(action_mse(&pred, &img.target))
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / set.len() as f64)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

fn category_cycle(i: usize) -> WireCategory {
    WireCategory::ALL[i % 3]
}

/// The labeled training set for a trial seed (distinct from the probe and
/// the holdout streams).
pub fn training_set(seed: u64, size: usize) -> Vec<WireImage> {
    (0..size)
        .map(|i| generate_wire_image(category_cycle(i), mix(mix(seed, 0xA11), i as u64)))
        .collect()
}

/// The held-out evaluation set for a trial seed.
pub fn holdout_set(seed: u64, size: usize) -> Vec<WireImage> {
    (0..size)
        .map(|i| generate_wire_image(category_cycle(i), mix(mix(seed, 0xB22), i as u64)))
        .collect()
}

/// Trains one network from scratch by seeded behavior cloning.
pub fn train_trial(cfg: &TrialConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut net = Network::reference(cfg.seed, cfg.dropout);
    let train = training_set(cfg.seed, cfg.train_set_size);
    let holdout = holdout_set(cfg.seed, cfg.holdout_size);

    let mut shuffle_rng = seeded_rng("train-shuffle", cfg.seed);
    let mut dropout_rng = seeded_rng("train-dropout", cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let use_dropout = cfg.dropout > 0.0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Tensor, Action)> = chunk
                .iter()
                .map(|&i| (&train[i].pixels, train[i].target))
                .collect();
            let masks = use_dropout.then(|| sample_dropout_masks(&net, batch.len(), &mut dropout_rng));
            let (loss, grad) = batch_loss_and_grad(&net, &batch, masks.as_ref())?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            apply_step(&mut net, &grad, cfg.learning_rate);
            epoch_loss += loss * chunk.len() as f64;
        }
        loss_history.push(epoch_loss / train.len() as f64);
    }

    let final_train_loss = loss_history.last().copied().unwrap_or(f64::NAN);
    let holdout_mse = eval_mse(&net, &holdout)?;
    let undertrained = cfg.epochs == 0 || !(holdout_mse < cfg.holdout_threshold);
    net.metadata_mut().seed = cfg.seed;
    net.metadata_mut().loss_history = loss_history;
    Ok(TrainOutcome {
        network: net,
        final_train_loss,
        holdout_mse,
        undertrained,
    })
}

/// `params -= lr * grad`, walking layers in flat parameter order.
fn apply_step(net: &mut Network, grad: &[f64], lr: f64) {
    let mut off = 0;
    for layer in net.trunk_mut() {
        match layer {
            Layer::Conv2D { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                for w in weights.iter_mut() {
                    *w -= lr * grad[off];
                    off += 1;
                }
                for b in bias.iter_mut() {
                    *b -= lr * grad[off];
                    off += 1;
                }
            }
            _ => {}
        }
    }
    for head in net.heads_mut() {
        for w in head.weights.iter_mut() {
            *w -= lr * grad[off];
            off += 1;
        }
        head.bias -= lr * grad[off];
        off += 1;
    }
    debug_assert_eq!(off, grad.len());
}

/// Trains `n` independent trials (seeds `base_seed..base_seed + n`) sharing
/// one probe set. Trials run in parallel on per-trial streams and are
/// collected in trial order.
pub fn run_trials(base_cfg: &TrialConfig, n: usize, base_seed: u64) -> Result<TrialSet> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "cross-trial clustering needs at least 2 trials".into(),
        ));
    }
    let probe = build_probe_set(base_seed);
    let outcomes: Vec<Result<TrainOutcome>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cfg = TrialConfig {
                seed: base_seed + i as u64,
                ..base_cfg.clone()
            };
            train_trial(&cfg)
        })
        .collect();
    let mut trials = Vec::with_capacity(n);
    for (i, out) in outcomes.into_iter().enumerate() {
        let mut out = out.map_err(|e| Error::Trial {
            trial: i,
            source: Box::new(e),
        })?;
        out.network.metadata_mut().trial_id = i as u32;
        trials.push(out);
    }
    Ok(TrialSet { trials, probe })
}

/// Tab-separated manifest of a trial set: seeds and final losses.
pub fn manifest_to_string(set: &TrialSet) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("trial\tseed\tfinal_train_loss\tholdout_mse\tundertrained\n");
    for t in &set.trials {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            t.network.metadata().trial_id,
            t.network.metadata().seed,
            crate::textfmt::g17(t.final_train_loss),
            crate::textfmt::g17(t.holdout_mse),
            t.undertrained
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_test_net(seed: u64, with_dropout: bool) -> Network {
        use crate::nn::{Head, HeadActivation, Metadata};
        let mut rng = seeded_rng("small-net", seed);
        let mut trunk = vec![Layer::Conv2D {
            out_filters: 2,
            in_channels: 1,
            kh: 3,
            kw: 3,
            weights: (0..18).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            bias: (0..2).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        }];
        trunk.push(Layer::ReLU);
        trunk.push(Layer::MaxPool2D { size: 2, stride: 2 });
        if with_dropout {
            trunk.push(Layer::Dropout { rate: 0.2 });
        }
        trunk.push(Layer::Flatten);
        trunk.push(Layer::Dense {
            out: 5,
            input: 2 * 3 * 3,
            weights: (0..5 * 18).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            bias: (0..5).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        });
        trunk.push(Layer::ReLU);
        let heads = [
            Head {
                activation: HeadActivation::Sigmoid,
                weights: (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                bias: rng.gen_range(-0.1..0.1),
            },
            Head {
                activation: HeadActivation::Tanh,
                weights: (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                bias: rng.gen_range(-0.1..0.1),
            },
            Head {
                activation: HeadActivation::Tanh,
                weights: (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                bias: rng.gen_range(-0.1..0.1),
            },
        ];
        Network::new([1, 8, 8], trunk, heads, Metadata::default()).unwrap()
    }

    fn random_batch(seed: u64, n: usize) -> Vec<(Tensor, Action)> {
        let mut rng = seeded_rng("small-batch", seed);
        (0..n)
            .map(|_| {
                let img = Tensor::new(
                    vec![1, 8, 8],
                    (0..64).map(|_| rng.gen_range(0.0..1.0)).collect(),
                )
                .unwrap();
                let target = Action {
                    longitudinal: rng.gen_range(0.0..1.0),
                    lateral: rng.gen_range(-1.0..1.0),
                    rotational: rng.gen_range(-1.0..1.0),
                };
                (img, target)
            })
            .collect()
    }

    /// Central finite differences against the analytic gradient.
    fn check_gradients(net: &Network, batch: &[(Tensor, Action)], masks: Option<&DropoutMasks>) {
        let refs: Vec<(&Tensor, Action)> = batch.iter().map(|(t, a)| (t, *a)).collect();
        let (_, grad) = batch_loss_and_grad(net, &refs, masks).unwrap();
        let params = net.params();
        let eps = 1e-5;
        for i in 0..params.len() {
            let mut plus = net.clone();
            let mut p = params.clone();
            p[i] += eps;
            plus.set_params(&p).unwrap();
            let lp = batch_loss(&plus, &refs, masks).unwrap();
            let mut minus = net.clone();
            p[i] = params[i] - eps;
            minus.set_params(&p).unwrap();
            let lm = batch_loss(&minus, &refs, masks).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let a = grad[i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            assert!(
                rel < 1e-4,
                "param {i}: analytic {a} vs fd {fd} (rel {rel})"
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let net = small_test_net(seed, false);
            let batch = random_batch(seed, 3);
            check_gradients(&net, &batch, None);
        }
    }

    #[test]
    fn gradients_match_finite_differences_with_dropout_masks() {
        let net = small_test_net(9, true);
        let batch = random_batch(9, 2);
        let mut rng = seeded_rng("mask-sample", 0);
        let masks = sample_dropout_masks(&net, batch.len(), &mut rng);
        check_gradients(&net, &batch, Some(&masks));
    }

    #[test]
    fn epochs_zero_keeps_initialization_and_flags_undertrained() {
        let cfg = TrialConfig {
            epochs: 0,
            ..TrialConfig::default()
        };
        let out = train_trial(&cfg).unwrap();
        assert!(out.undertrained);
        let init = Network::reference(cfg.seed, cfg.dropout);
        assert_eq!(out.network.params(), init.params());
    }

    #[test]
    fn single_trial_is_rejected() {
        match run_trials(&TrialConfig::default(), 1, 0) {
            Err(Error::InvalidConfig(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn sgd_step_moves_loss_downhill() {
        let net = small_test_net(4, false);
        let batch = random_batch(4, 4);
        let refs: Vec<(&Tensor, Action)> = batch.iter().map(|(t, a)| (t, *a)).collect();
        let (l0, grad) = batch_loss_and_grad(&net, &refs, None).unwrap();
        let mut stepped = net.clone();
        apply_step(&mut stepped, &grad, 0.1);
        let l1 = batch_loss(&stepped, &refs, None).unwrap();
        assert!(l1 < l0, "one SGD step should reduce batch loss: {l1} vs {l0}");
    }
}
