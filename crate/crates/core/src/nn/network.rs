//! The actor network: a trunk of layers feeding three scalar output heads.

use rand::{Rng, RngCore};

use super::layer::{self, Layer};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Steering command predicted from one image. `longitudinal` is forward
/// motion in `[0, 1]`; `lateral` and `rotational` are signed in `[-1, 1]`
/// with left as the positive direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub longitudinal: f64,
    pub lateral: f64,
    pub rotational: f64,
}

impl Action {
    pub fn components(&self) -> [f64; 3] {
        [self.longitudinal, self.lateral, self.rotational]
    }
}

/// An [`Action`] scaled to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalAction {
    pub longitudinal_cm: f64,
    pub lateral_cm: f64,
    pub rotational_deg: f64,
}

/// Scale factors applied to a normalized action: 3 cm, 3 cm, 90 degrees.
pub fn scale_action(a: Action) -> PhysicalAction {
    PhysicalAction {
        longitudinal_cm: a.longitudinal * 3.0,
        lateral_cm: a.lateral * 3.0,
        rotational_deg: a.rotational * 90.0,
    }
}

/// Squashing applied to a head's scalar pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadActivation {
    /// Maps to `[0, 1]`; used by the longitudinal head.
    Sigmoid,
    /// Maps to `[-1, 1]`; used by the lateral and rotational heads.
    Tanh,
}

impl HeadActivation {
    pub fn name(self) -> &'static str {
        match self {
            HeadActivation::Sigmoid => "sigmoid",
            HeadActivation::Tanh => "tanh",
        }
    }

    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            HeadActivation::Sigmoid => layer::sigmoid(z),
            HeadActivation::Tanh => z.tanh(),
        }
    }
}

pub const HEAD_NAMES: [&str; 3] = ["longitudinal", "lateral", "rotational"];

/// One scalar output head: a dense row into a squashing activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub activation: HeadActivation,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub trial_id: u32,
    pub seed: u64,
    /// Mean training loss per epoch, filled by the trainer.
    pub loss_history: Vec<f64>,
}

/// Zeroes chosen activations of one trunk layer's output before propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMask {
    layer_index: usize,
    neurons: Vec<usize>,
}

impl ActivationMask {
    pub fn new(layer_index: usize, neurons: impl IntoIterator<Item = usize>) -> Self {
        let mut neurons: Vec<usize> = neurons.into_iter().collect();
        neurons.sort_unstable();
        neurons.dedup();
        Self {
            layer_index,
            neurons,
        }
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn neurons(&self) -> &[usize] {
        &self.neurons
    }
}

/// Forward-pass mode. Training mode activates dropout, drawing its masks
/// from the supplied stream; eval mode is fully deterministic.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// An immutable, shape-validated network. Forward passes never mutate it, so
/// a shared reference can be used from many threads at once.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: [usize; 3],
    trunk: Vec<Layer>,
    heads: [Head; 3],
    metadata: Metadata,
}

impl Network {
    /// Validates parameter shapes and chains every layer's output shape into
    /// the next layer's input; the trunk must end in a flat vector matching
    /// all three head widths.
    pub fn new(
        input_shape: [usize; 3],
        trunk: Vec<Layer>,
        heads: [Head; 3],
        metadata: Metadata,
    ) -> Result<Self> {
        let net = Self {
            input_shape,
            trunk,
            heads,
            metadata,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let mut shape = self.input_shape.to_vec();
        for (i, layer) in self.trunk.iter().enumerate() {
            layer.validate(i)?;
            shape = layer.output_shape(&shape, i)?;
        }
        if shape.len() != 1 {
            return Err(Error::ShapeChain {
                layer: self.trunk.len(),
                detail: format!("trunk must end in a flat vector, got {shape:?}"),
            });
        }
        for (h, head) in self.heads.iter().enumerate() {
            if head.weights.len() != shape[0] {
                return Err(Error::ShapeChain {
                    layer: self.trunk.len(),
                    detail: format!(
                        "{} head expects {} inputs, trunk provides {}",
                        HEAD_NAMES[h],
                        head.weights.len(),
                        shape[0]
                    ),
                });
            }
        }
        // The declared action space is only reachable with these squashers.
        if self.heads[0].activation != HeadActivation::Sigmoid
            || self.heads[1].activation != HeadActivation::Tanh
            || self.heads[2].activation != HeadActivation::Tanh
        {
            return Err(Error::InvalidConfig(
                "heads must be squashed (sigmoid, tanh, tanh)".into(),
            ));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn trunk(&self) -> &[Layer] {
        &self.trunk
    }

    pub fn heads(&self) -> &[Head; 3] {
        &self.heads
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub(crate) fn trunk_mut(&mut self) -> &mut [Layer] {
        &mut self.trunk
    }

    pub(crate) fn heads_mut(&mut self) -> &mut [Head; 3] {
        &mut self.heads
    }

    pub(crate) fn metadata_mut(&mut self) -> &mut Metadata {
        &mut self.metadata
    }

    /// Width of the trunk's flat output (the heads' shared input width).
    pub fn trunk_output_width(&self) -> usize {
        self.heads[0].weights.len()
    }

    /// Index of the last dense trunk layer; the conventional ablation target.
    pub fn last_dense_index(&self) -> Option<usize> {
        self.trunk
            .iter()
            .rposition(|l| matches!(l, Layer::Dense { .. }))
    }

    /// Number of units a trunk layer outputs (given this network's input).
    pub fn layer_output_len(&self, layer_index: usize) -> Result<usize> {
        let mut shape = self.input_shape.to_vec();
        for (i, layer) in self.trunk.iter().enumerate() {
            shape = layer.output_shape(&shape, i)?;
            if i == layer_index {
                return Ok(shape.iter().product());
            }
        }
        Err(Error::InvalidInput(format!(
            "layer index {layer_index} out of range (trunk has {} layers)",
            self.trunk.len()
        )))
    }

    /// Runs one image through the network. With a mask present, the masked
    /// neurons' activations are exactly zero before propagating further.
    pub fn forward(
        &self,
        image: &Tensor,
        mut mode: Mode<'_>,
        mask: Option<&ActivationMask>,
    ) -> Result<Action> {
        if image.shape() != self.input_shape {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!(
                    "input shape {:?} does not match network input {:?}",
                    image.shape(),
                    self.input_shape
                ),
            });
        }
        if let Some(m) = mask {
            if m.layer_index() >= self.trunk.len() {
                return Err(Error::InvalidInput(format!(
                    "mask targets layer {} but trunk has {} layers",
                    m.layer_index(),
                    self.trunk.len()
                )));
            }
            let width = self.layer_output_len(m.layer_index())?;
            if let Some(&bad) = m.neurons().iter().find(|&&n| n >= width) {
                return Err(Error::InvalidInput(format!(
                    "mask neuron {bad} out of range for layer {} (width {width})",
                    m.layer_index()
                )));
            }
        }

        let mut act = image.clone();
        for (i, layer) in self.trunk.iter().enumerate() {
            act = self.apply_layer(layer, act, i, &mut mode)?;
            if !act.all_finite() {
                return Err(Error::NonFinite { layer: i });
            }
            if let Some(m) = mask {
                if m.layer_index() == i {
                    let data = act.data_mut();
                    for &n in m.neurons() {
                        data[n] = 0.0;
                    }
                }
            }
        }

        let features = act.data();
        let mut out = [0.0f64; 3];
        for (h, head) in self.heads.iter().enumerate() {
            let mut z = head.bias;
            for (w, a) in head.weights.iter().zip(features) {
                z += w * a;
            }
            out[h] = head.activation.apply(z);
        }
        let action = Action {
            longitudinal: out[0],
            lateral: out[1],
            rotational: out[2],
        };
        if !action.components().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                layer: self.trunk.len(),
            });
        }
        Ok(action)
    }

    fn apply_layer(
        &self,
        layer: &Layer,
        input: Tensor,
        index: usize,
        mode: &mut Mode<'_>,
    ) -> Result<Tensor> {
        // Shape compatibility is established by `validate`, but recheck so a
        // hand-mutated network cannot cause out-of-bounds access.
        let out_shape = layer.output_shape(input.shape(), index)?;
        let out = match layer {
            Layer::Conv2D {
                out_filters,
                in_channels,
                kh,
                kw,
                weights,
                bias,
            } => layer::conv2d_forward(&input, *out_filters, *in_channels, *kh, *kw, weights, bias),
            Layer::MaxPool2D { size, stride } => layer::maxpool_forward(&input, *size, *stride).0,
            Layer::Dense {
                out,
                input: n,
                weights,
                bias,
            } => {
                let z = layer::dense_forward(input.data(), *out, *n, weights, bias);
                Tensor::new(vec![*out], z)?
            }
            Layer::ReLU => {
                let mut t = input;
                for v in t.data_mut() {
                    *v = layer::relu(*v);
                }
                t
            }
            Layer::Tanh => {
                let mut t = input;
                for v in t.data_mut() {
                    *v = v.tanh();
                }
                t
            }
            Layer::Sigmoid => {
                let mut t = input;
                for v in t.data_mut() {
                    *v = layer::sigmoid(*v);
                }
                t
            }
            Layer::Flatten => Tensor::new(out_shape.clone(), input.into_data())?,
            Layer::Dropout { rate } => match mode {
                Mode::Eval => input,
                Mode::Train(rng) => {
                    let keep_scale = 1.0 / (1.0 - rate);
                    let mut t = input;
                    for v in t.data_mut() {
                        if rng.gen::<f64>() < *rate {
                            *v = 0.0;
                        } else {
                            *v *= keep_scale;
                        }
                    }
                    t
                }
            },
        };
        debug_assert_eq!(out.shape(), &out_shape[..]);
        Ok(out)
    }

    // -- parameter vector access (training, similarity metrics, tests) ------

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        for layer in &self.trunk {
            match layer {
                Layer::Conv2D { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                    n += weights.len() + bias.len();
                }
                _ => {}
            }
        }
        n + self.heads.iter().map(|h| h.weights.len() + 1).sum::<usize>()
    }

    /// All weights and biases flattened in layer order (trunk, then heads).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for layer in &self.trunk {
            match layer {
                Layer::Conv2D { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                    p.extend_from_slice(weights);
                    p.extend_from_slice(bias);
                }
                _ => {}
            }
        }
        for head in &self.heads {
            p.extend_from_slice(&head.weights);
            p.push(head.bias);
        }
        p
    }

    /// Writes a parameter vector produced by [`Network::params`] back.
    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::InvalidInput(format!(
                "parameter vector has {} values, network needs {}",
                p.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        for layer in &mut self.trunk {
            match layer {
                Layer::Conv2D { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                    let (nw, nb) = (weights.len(), bias.len());
                    weights.copy_from_slice(&p[off..off + nw]);
                    off += nw;
                    bias.copy_from_slice(&p[off..off + nb]);
                    off += nb;
                }
                _ => {}
            }
        }
        for head in &mut self.heads {
            let nw = head.weights.len();
            head.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            head.bias = p[off];
            off += 1;
        }
        Ok(())
    }

    // -- reference architecture ---------------------------------------------

    /// The standard actor: three conv stages (30, 15, 10 filters with 5x5,
    /// 5x5, 3x3 kernels, each ReLU + 2x2 pooled), dense 400 and 200 layers,
    /// and the three squashed heads. Input is a 64x64 grayscale image.
    /// Weights are He-initialized from the seed; dropout layers carry the
    /// given rate and are inert outside training.
    pub fn reference(seed: u64, dropout: f64) -> Network {
        let mut rng = seeded_rng("weight-init", seed);
        let mut trunk = Vec::new();
        let push_conv = |trunk: &mut Vec<Layer>, cin: usize, cout: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let fan_in = cin * k * k;
            let limit = (6.0 / fan_in as f64).sqrt();
            let weights = (0..cout * cin * k * k).map(|_| rng.gen_range(-limit..limit)).collect();
            trunk.push(Layer::Conv2D {
                out_filters: cout,
                in_channels: cin,
                kh: k,
                kw: k,
                weights,
                bias: vec![0.0; cout],
            });
            trunk.push(Layer::ReLU);
            trunk.push(Layer::MaxPool2D { size: 2, stride: 2 });
            trunk.push(Layer::Dropout { rate: dropout });
        };
        push_conv(&mut trunk, 1, 30, 5, &mut rng);
        push_conv(&mut trunk, 30, 15, 5, &mut rng);
        push_conv(&mut trunk, 15, 10, 3, &mut rng);
        trunk.push(Layer::Flatten);
        for (n_in, n_out) in [(250usize, 400usize), (400, 200)] {
            let limit = (6.0 / n_in as f64).sqrt();
            let weights = (0..n_out * n_in).map(|_| rng.gen_range(-limit..limit)).collect();
            trunk.push(Layer::Dense {
                out: n_out,
                input: n_in,
                weights,
                bias: vec![0.0; n_out],
            });
            trunk.push(Layer::ReLU);
            trunk.push(Layer::Dropout { rate: dropout });
        }
        let head = |act: HeadActivation, bias: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            let limit = (6.0f64 / 201.0).sqrt();
            Head {
                activation: act,
                weights: (0..200).map(|_| rng.gen_range(-limit..limit)).collect(),
                bias,
            }
        };
        // The longitudinal command saturates near full forward on this task;
        // starting its sigmoid pre-activation positive skips the slow climb
        // out of the 0.5 plateau.
        let heads = [
            head(HeadActivation::Sigmoid, 2.0, &mut rng),
            head(HeadActivation::Tanh, 0.0, &mut rng),
            head(HeadActivation::Tanh, 0.0, &mut rng),
        ];
        Network::new(
            [1, 64, 64],
            trunk,
            heads,
            Metadata {
                trial_id: 0,
                seed,
                loss_history: Vec::new(),
            },
        )
        .expect("reference architecture is shape-consistent")
    }

    /// Reference architecture with every weight and bias set to zero.
    pub fn reference_zero() -> Network {
        let mut net = Self::reference(0, 0.2);
        let zeros = vec![0.0; net.param_count()];
        net.set_params(&zeros).expect("zero vector matches");
        net
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_center_action() {
        let net = Network::reference_zero();
        let img = Tensor::zeros(vec![1, 64, 64]);
        let a = net.forward(&img, Mode::Eval, None).unwrap();
        assert_eq!(a, Action { longitudinal: 0.5, lateral: 0.0, rotational: 0.0 });
    }

    #[test]
    fn reference_trunk_flow_is_250_400_200() {
        let net = Network::reference(1, 0.2);
        assert_eq!(net.trunk_output_width(), 200);
        let kinds: Vec<&str> = net
            .trunk()
            .iter()
            .filter(|l| !matches!(l, Layer::ReLU | Layer::Dropout { .. }))
            .map(|l| l.kind_name())
            .collect();
        assert_eq!(
            kinds,
            vec![
                "conv2d", "maxpool2d", "conv2d", "maxpool2d", "conv2d", "maxpool2d", "flatten",
                "dense", "dense"
            ]
        );
        // conv filter counts 30, 15, 10 and flatten width 250
        let filters: Vec<usize> = net
            .trunk()
            .iter()
            .filter_map(|l| match l {
                Layer::Conv2D { out_filters, .. } => Some(*out_filters),
                _ => None,
            })
            .collect();
        assert_eq!(filters, vec![30, 15, 10]);
        let dense_dims: Vec<(usize, usize)> = net
            .trunk()
            .iter()
            .filter_map(|l| match l {
                Layer::Dense { out, input, .. } => Some((*input, *out)),
                _ => None,
            })
            .collect();
        assert_eq!(dense_dims, vec![(250, 400), (400, 200)]);
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let net = Network::reference(3, 0.2);
        let img = Tensor::zeros(vec![1, 32, 32]);
        match net.forward(&img, Mode::Eval, None) {
            Err(Error::ShapeMismatch { .. }) => {}
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn action_components_in_declared_ranges() {
        let net = Network::reference(11, 0.2);
        let mut rng = seeded_rng("range-test", 0);
        for _ in 0..5 {
            let img = Tensor::new(
                vec![1, 64, 64],
                (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap();
            let a = net.forward(&img, Mode::Eval, None).unwrap();
            assert!((0.0..=1.0).contains(&a.longitudinal));
            assert!((-1.0..=1.0).contains(&a.lateral));
            assert!((-1.0..=1.0).contains(&a.rotational));
            assert!(a.components().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn scale_action_examples() {
        let full = scale_action(Action { longitudinal: 1.0, lateral: -1.0, rotational: 1.0 });
        assert_eq!(full, PhysicalAction { longitudinal_cm: 3.0, lateral_cm: -3.0, rotational_deg: 90.0 });
        let zero = scale_action(Action { longitudinal: 0.0, lateral: 0.0, rotational: 0.0 });
        assert_eq!(zero, PhysicalAction { longitudinal_cm: 0.0, lateral_cm: 0.0, rotational_deg: 0.0 });
        let half = scale_action(Action { longitudinal: 0.5, lateral: 0.5, rotational: -0.5 });
        assert_eq!(half, PhysicalAction { longitudinal_cm: 1.5, lateral_cm: 1.5, rotational_deg: -45.0 });
    }

    #[test]
    fn eval_forward_is_deterministic_across_threads() {
        let net = std::sync::Arc::new(Network::reference(5, 0.2));
        let mut rng = seeded_rng("thread-test", 1);
        let img = Tensor::new(
            vec![1, 64, 64],
            (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let baseline = net.forward(&img, Mode::Eval, None).unwrap();
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let net = net.clone();
                let img = img.clone();
                std::thread::spawn(move || net.forward(&img, Mode::Eval, None).unwrap())
            })
            .collect();
        for h in handles {
            let a = h.join().unwrap();
            assert_eq!(a.longitudinal.to_bits(), baseline.longitudinal.to_bits());
            assert_eq!(a.lateral.to_bits(), baseline.lateral.to_bits());
            assert_eq!(a.rotational.to_bits(), baseline.rotational.to_bits());
        }
    }

    #[test]
    fn train_mode_dropout_zeroes_about_a_fifth_and_rescales() {
        // A trunk that is just dropout over a wide flat input.
        let n = 4000usize;
        let trunk = vec![Layer::Flatten, Layer::Dropout { rate: 0.2 }];
        let heads = [
            Head { activation: HeadActivation::Sigmoid, weights: vec![0.0; n], bias: 0.0 },
            Head { activation: HeadActivation::Tanh, weights: vec![0.0; n], bias: 0.0 },
            Head { activation: HeadActivation::Tanh, weights: vec![0.0; n], bias: 0.0 },
        ];
        let net = Network::new([1, 1, n], trunk, heads, Metadata::default()).unwrap();
        // Drive the dropout layer directly through apply_layer via forward;
        // observe the mask statistics by re-running the same stream.
        let mut rng = seeded_rng("dropout-stats", 2);
        let input = Tensor::new(vec![1, 1, n], vec![1.0; n]).unwrap();
        let mut mode = Mode::Train(&mut rng);
        let flat = net.apply_layer(&net.trunk[0], input, 0, &mut mode).unwrap();
        let dropped = net.apply_layer(&net.trunk[1], flat, 1, &mut mode).unwrap();
        let zeros = dropped.data().iter().filter(|v| **v == 0.0).count();
        let expected = 0.2 * n as f64;
        let sigma = (n as f64 * 0.2 * 0.8).sqrt();
        assert!(
            (zeros as f64 - expected).abs() < 5.0 * sigma,
            "dropout zeroed {zeros} of {n}"
        );
        for v in dropped.data() {
            assert!(*v == 0.0 || (*v - 1.25).abs() < 1e-15, "survivor scaled by 1/0.8");
        }
    }

    #[test]
    fn mask_zeroes_targeted_activations() {
        let net = Network::reference(2, 0.2);
        let dense_idx = net.last_dense_index().unwrap();
        let mut rng = seeded_rng("mask-test", 0);
        let img = Tensor::new(
            vec![1, 64, 64],
            (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let mask = ActivationMask::new(dense_idx, 0..200);
        let a = net.forward(&img, Mode::Eval, Some(&mask)).unwrap();
        // All trunk features zeroed: heads see nothing but their bias (0 here).
        assert_eq!(a.longitudinal, 0.5);
        assert_eq!(a.lateral, 0.0);
        assert_eq!(a.rotational, 0.0);
    }

    #[test]
    fn mask_out_of_range_is_rejected() {
        let net = Network::reference(2, 0.2);
        let img = Tensor::zeros(vec![1, 64, 64]);
        let mask = ActivationMask::new(999, [0]);
        assert!(net.forward(&img, Mode::Eval, Some(&mask)).is_err());
        let dense_idx = net.last_dense_index().unwrap();
        let mask = ActivationMask::new(dense_idx, [200]);
        assert!(net.forward(&img, Mode::Eval, Some(&mask)).is_err());
    }

    #[test]
    fn params_roundtrip() {
        let mut net = Network::reference(4, 0.2);
        let p = net.params();
        assert_eq!(p.len(), net.param_count());
        let mut p2 = p.clone();
        for v in &mut p2 {
            *v += 0.125;
        }
        net.set_params(&p2).unwrap();
        assert_eq!(net.params(), p2);
    }
}
