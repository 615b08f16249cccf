//! Layer kinds and their forward/backward arithmetic.
//!
//! Conventions: convolutions are valid-padding stride 1 with weights laid out
//! `[filter][in_channel][ky][kx]`; pooling windows that do not fit are
//! dropped (floor semantics on odd extents); dense weights are `(out, in)`
//! row-major. Dropout is the inverted formulation: survivors are scaled by
//! `1/(1-rate)` during training and the layer is an identity in eval mode.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2D {
        out_filters: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        /// `[out_filters][in_channels][kh][kw]`, row-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    MaxPool2D {
        size: usize,
        stride: usize,
    },
    Dense {
        out: usize,
        input: usize,
        /// `(out, in)` row-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    ReLU,
    Tanh,
    Sigmoid,
    Flatten,
    Dropout {
        rate: f64,
    },
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2D { .. } => "conv2d",
            Layer::MaxPool2D { .. } => "maxpool2d",
            Layer::Dense { .. } => "dense",
            Layer::ReLU => "relu",
            Layer::Tanh => "tanh",
            Layer::Sigmoid => "sigmoid",
            Layer::Flatten => "flatten",
            Layer::Dropout { .. } => "dropout",
        }
    }

    /// Checks internal parameter consistency (weight/bias lengths, rate range).
    pub fn validate(&self, layer_index: usize) -> Result<()> {
        match self {
            Layer::Conv2D {
                out_filters,
                in_channels,
                kh,
                kw,
                weights,
                bias,
            } => {
                let want = out_filters * in_channels * kh * kw;
                if weights.len() != want {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: format!(
                            "conv2d weights must hold {} values ({}x{}x{}x{}), got {}",
                            want,
                            out_filters,
                            in_channels,
                            kh,
                            kw,
                            weights.len()
                        ),
                    });
                }
                if bias.len() != *out_filters {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: format!(
                            "conv2d bias must hold {} values, got {}",
                            out_filters,
                            bias.len()
                        ),
                    });
                }
                if *out_filters == 0 || *in_channels == 0 || *kh == 0 || *kw == 0 {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: "conv2d extents must be nonzero".into(),
                    });
                }
            }
            Layer::MaxPool2D { size, stride } => {
                if *size == 0 || *stride == 0 {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: "maxpool2d size and stride must be nonzero".into(),
                    });
                }
            }
            Layer::Dense {
                out,
                input,
                weights,
                bias,
            } => {
                if weights.len() != out * input {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: format!(
                            "dense weights must hold {} values ({}x{}), got {}",
                            out * input,
                            out,
                            input,
                            weights.len()
                        ),
                    });
                }
                if bias.len() != *out {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: format!("dense bias must hold {} values, got {}", out, bias.len()),
                    });
                }
                if *out == 0 || *input == 0 {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: "dense extents must be nonzero".into(),
                    });
                }
            }
            Layer::Dropout { rate } => {
                if !(*rate >= 0.0 && *rate < 1.0) {
                    return Err(Error::ShapeChain {
                        layer: layer_index,
                        detail: format!("dropout rate must be in [0,1), got {rate}"),
                    });
                }
            }
            Layer::ReLU | Layer::Tanh | Layer::Sigmoid | Layer::Flatten => {}
        }
        Ok(())
    }

    /// Output shape for a given input shape, or a shape-chain error naming
    /// the layer.
    pub fn output_shape(&self, input: &[usize], layer_index: usize) -> Result<Vec<usize>> {
        let fail = |detail: String| Error::ShapeChain {
            layer: layer_index,
            detail,
        };
        match self {
            Layer::Conv2D {
                out_filters,
                in_channels,
                kh,
                kw,
                ..
            } => {
                let [c, h, w] = three_dims(input)
                    .ok_or_else(|| fail(format!("conv2d needs a 3-D input, got {input:?}")))?;
                if c != *in_channels {
                    return Err(fail(format!(
                        "conv2d expects {in_channels} input channels, got {c}"
                    )));
                }
                if h < *kh || w < *kw {
                    return Err(fail(format!(
                        "conv2d kernel {kh}x{kw} does not fit input {h}x{w}"
                    )));
                }
                Ok(vec![*out_filters, h - kh + 1, w - kw + 1])
            }
            Layer::MaxPool2D { size, stride } => {
                let [c, h, w] = three_dims(input)
                    .ok_or_else(|| fail(format!("maxpool2d needs a 3-D input, got {input:?}")))?;
                if h < *size || w < *size {
                    return Err(fail(format!(
                        "maxpool2d window {size}x{size} does not fit input {h}x{w}"
                    )));
                }
                Ok(vec![c, (h - size) / stride + 1, (w - size) / stride + 1])
            }
            Layer::Dense { out, input: n, .. } => {
                if input.len() != 1 || input[0] != *n {
                    return Err(fail(format!(
                        "dense expects a flat input of {n}, got {input:?}"
                    )));
                }
                Ok(vec![*out])
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::ReLU | Layer::Tanh | Layer::Sigmoid | Layer::Dropout { .. } => {
                Ok(input.to_vec())
            }
        }
    }
}

fn three_dims(shape: &[usize]) -> Option<[usize; 3]> {
    match shape {
        [c, h, w] => Some([*c, *h, *w]),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Forward primitives
// ---------------------------------------------------------------------------

pub(crate) fn conv2d_forward(
    input: &Tensor,
    out_filters: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    weights: &[f64],
    bias: &[f64],
) -> Tensor {
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = Tensor::zeros(vec![out_filters, oh, ow]);
    let x = input.data();
    let o = out.data_mut();
    for f in 0..out_filters {
        let plane = &mut o[f * oh * ow..(f + 1) * oh * ow];
        plane.fill(bias[f]);
        for c in 0..in_channels {
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weights[((f * in_channels + c) * kh + ky) * kw + kx];
                    for oy in 0..oh {
                        let in_row = &x[(c * h + oy + ky) * w + kx..][..ow];
                        let out_row = &mut plane[oy * ow..(oy + 1) * ow];
                        for (oval, ival) in out_row.iter_mut().zip(in_row) {
                            *oval += wv * ival;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns the pooled tensor and, for each output cell, the flat input index
/// of its maximum (ties resolved to the first element in scan order).
pub(crate) fn maxpool_forward(input: &Tensor, size: usize, stride: usize) -> (Tensor, Vec<usize>) {
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = ((h - size) / stride + 1, (w - size) / stride + 1);
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let x = input.data();
    let o = out.data_mut();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for ky in 0..size {
                    for kx in 0..size {
                        let idx = (ch * h + oy * stride + ky) * w + ox * stride + kx;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let oidx = (ch * oh + oy) * ow + ox;
                o[oidx] = best;
                argmax[oidx] = best_idx;
            }
        }
    }
    (out, argmax)
}

/// Four-lane dot product: fixed reassociation that the optimizer can keep
/// in SIMD registers (a plain reduction chain is latency-bound).
pub(crate) fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let mut acc = [0.0f64; 4];
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in chunks * 4..n {
        s += a[j] * b[j];
    }
    s
}

pub(crate) fn dense_forward(input: &[f64], out: usize, n: usize, weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(out);
    for o in 0..out {
        z.push(bias[o] + dot4(&weights[o * n..(o + 1) * n], input));
    }
    z
}

pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

// ---------------------------------------------------------------------------
// Backward primitives (used by the trainer)
// ---------------------------------------------------------------------------

/// Gradients of a valid-padding stride-1 convolution. `compute_dinput` can
/// be turned off for the first layer, whose input gradient nobody consumes.
pub(crate) fn conv2d_backward(
    input: &Tensor,
    dout: &Tensor,
    out_filters: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    weights: &[f64],
    compute_dinput: bool,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (dout.shape()[1], dout.shape()[2]);
    let x = input.data();
    let g = dout.data();
    let mut dweights = vec![0.0; weights.len()];
    let mut dbias = vec![0.0; out_filters];

    // One accumulator per kx keeps kw independent FMA chains in flight; the
    // kernel is monomorphized for the kernel widths the architecture uses.
    fn dw_kernel<const KW: usize>(
        gplane: &[f64],
        xplane: &[f64],
        w: usize,
        oh: usize,
        ow: usize,
        ky: usize,
        out: &mut [f64],
    ) {
        let mut acc = [0.0f64; KW];
        for oy in 0..oh {
            let grow = &gplane[oy * ow..(oy + 1) * ow];
            let xrow = &xplane[(oy + ky) * w..(oy + ky) * w + ow + KW - 1];
            for (ox, gv) in grow.iter().enumerate() {
                for kx in 0..KW {
                    acc[kx] += gv * xrow[ox + kx];
                }
            }
        }
        out[..KW].copy_from_slice(&acc);
    }

    for f in 0..out_filters {
        let gplane = &g[f * oh * ow..(f + 1) * oh * ow];
        dbias[f] = gplane.iter().sum();
        for c in 0..in_channels {
            let xplane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..kh {
                let out = &mut dweights[((f * in_channels + c) * kh + ky) * kw..][..kw];
                match kw {
                    5 => dw_kernel::<5>(gplane, xplane, w, oh, ow, ky, out),
                    3 => dw_kernel::<3>(gplane, xplane, w, oh, ow, ky, out),
                    1 => dw_kernel::<1>(gplane, xplane, w, oh, ow, ky, out),
                    _ => {
                        for kx in 0..kw {
                            let mut dw = 0.0;
                            for oy in 0..oh {
                                let grow = &gplane[oy * ow..(oy + 1) * ow];
                                let xrow = &xplane[(oy + ky) * w + kx..][..ow];
                                dw += dot4(grow, xrow);
                            }
                            out[kx] = dw;
                        }
                    }
                }
            }
        }
    }

    let mut dinput = Tensor::zeros(if compute_dinput {
        vec![in_channels, h, w]
    } else {
        vec![0]
    });
    if compute_dinput {
        let dx = dinput.data_mut();
        for f in 0..out_filters {
            let gplane = &g[f * oh * ow..(f + 1) * oh * ow];
            for c in 0..in_channels {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = weights[((f * in_channels + c) * kh + ky) * kw + kx];
                        for oy in 0..oh {
                            let grow = &gplane[oy * ow..(oy + 1) * ow];
                            let dxrow = &mut dx[(c * h + oy + ky) * w + kx..][..ow];
                            for (dxv, gv) in dxrow.iter_mut().zip(grow) {
                                *dxv += gv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    (dinput, dweights, dbias)
}

pub(crate) fn maxpool_backward(dout: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Tensor {
    let mut dinput = Tensor::zeros(input_shape.to_vec());
    let dx = dinput.data_mut();
    for (gv, &idx) in dout.data().iter().zip(argmax) {
        dx[idx] += gv;
    }
    dinput
}

pub(crate) fn dense_backward(
    input: &[f64],
    dout: &[f64],
    out: usize,
    n: usize,
    weights: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dinput = vec![0.0; n];
    let mut dweights = vec![0.0; out * n];
    let dbias = dout.to_vec();
    for o in 0..out {
        let g = dout[o];
        let wrow = &weights[o * n..(o + 1) * n];
        let dwrow = &mut dweights[o * n..(o + 1) * n];
        for i in 0..n {
            dwrow[i] = g * input[i];
            dinput[i] += g * wrow[i];
        }
    }
    (dinput, dweights, dbias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(c: usize, h: usize, w: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(vec![c, h, w], data).unwrap()
    }

    /// Direct six-loop convolution, kept deliberately naive as the oracle.
    fn conv_reference(
        input: &Tensor,
        out_filters: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        weights: &[f64],
        bias: &[f64],
    ) -> Tensor {
        let (h, w) = (input.shape()[1], input.shape()[2]);
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let mut out = Tensor::zeros(vec![out_filters, oh, ow]);
        for f in 0..out_filters {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[f];
                    for c in 0..in_channels {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                acc += weights[((f * in_channels + c) * kh + ky) * kw + kx]
                                    * input.at3(c, oy + ky, ox + kx);
                            }
                        }
                    }
                    out.set3(f, oy, ox, acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_all_ones_kernel_sums_windows() {
        // 4x4 image, 3x3 all-ones kernel, bias 0: each output is the window sum.
        let img = t3(1, 4, 4, (1..=16).map(f64::from).collect());
        let out = conv2d_forward(&img, 1, 1, 3, 3, &[1.0; 9], &[0.0]);
        // windows computed by hand
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.at3(0, 0, 0), 54.0); // 1+2+3+5+6+7+9+10+11
        assert_eq!(out.at3(0, 0, 1), 63.0);
        assert_eq!(out.at3(0, 1, 0), 90.0);
        assert_eq!(out.at3(0, 1, 1), 99.0);
    }

    #[test]
    fn conv_matches_six_loop_reference() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng("conv-oracle", 3);
        for _ in 0..20 {
            let (cin, cout) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let (kh, kw) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let (h, w) = (rng.gen_range(kh..kh + 5), rng.gen_range(kw..kw + 5));
            let input = t3(cin, h, w, (0..cin * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let weights: Vec<f64> = (0..cout * cin * kh * kw).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bias: Vec<f64> = (0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = conv2d_forward(&input, cout, cin, kh, kw, &weights, &bias);
            let slow = conv_reference(&input, cout, cin, kh, kw, &weights, &bias);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12, "conv mismatch: {a} vs {b}");
            }
        }
    }

    #[test]
    fn maxpool_floor_on_odd_extent() {
        // 1x5x5 -> 1x2x2 with 2x2 stride 2 (last row/col dropped)
        let img = t3(1, 5, 5, (0..25).map(f64::from).collect());
        let (out, argmax) = maxpool_forward(&img, 2, 2);
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.data(), &[6.0, 8.0, 16.0, 18.0]);
        assert_eq!(argmax, vec![6, 8, 16, 18]);
    }

    #[test]
    fn maxpool_tie_takes_first_in_scan_order() {
        let img = t3(1, 2, 2, vec![5.0, 5.0, 5.0, 5.0]);
        let (_, argmax) = maxpool_forward(&img, 2, 2);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn dense_forward_is_affine() {
        let z = dense_forward(&[1.0, 2.0], 2, 2, &[1.0, 0.0, 3.0, -1.0], &[0.5, -0.5]);
        assert_eq!(z, vec![1.5, 0.5]);
    }

    #[test]
    fn shape_chain_errors_name_the_layer() {
        let dense = Layer::Dense {
            out: 3,
            input: 4,
            weights: vec![0.0; 12],
            bias: vec![0.0; 3],
        };
        match dense.output_shape(&[5], 7) {
            Err(Error::ShapeChain { layer, .. }) => assert_eq!(layer, 7),
            other => panic!("expected shape chain error, got {other:?}"),
        }
    }
}
