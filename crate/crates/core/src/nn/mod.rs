//! Deterministic feed-forward inference plus gradient support and a
//! bit-exact serialization format for the actor architecture.

mod format;
mod layer;
mod network;
mod tensor;

pub use format::{load_network, network_from_str, network_to_string, save_network};
pub use layer::Layer;
pub use network::{
    scale_action, Action, ActivationMask, Head, HeadActivation, Metadata, Mode, Network,
    PhysicalAction, HEAD_NAMES,
};
pub use tensor::Tensor;

pub(crate) use format::{decode_f64s, encode_f64s};
pub(crate) use layer::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_backward,
    maxpool_forward, relu,
};

// Raw primitive entry points for the bench examples; not part of the API.
#[doc(hidden)]
pub fn bench_conv_forward(
    input: &Tensor,
    out_filters: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    weights: &[f64],
    bias: &[f64],
) -> Tensor {
    conv2d_forward(input, out_filters, in_channels, kh, kw, weights, bias)
}

#[doc(hidden)]
pub fn bench_conv_backward(
    input: &Tensor,
    dout: &Tensor,
    out_filters: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    weights: &[f64],
    compute_dinput: bool,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    conv2d_backward(input, dout, out_filters, in_channels, kh, kw, weights, compute_dinput)
}

#[doc(hidden)]
pub fn bench_dense_forward(input: &[f64], out: usize, n: usize, weights: &[f64], bias: &[f64]) -> Vec<f64> {
    dense_forward(input, out, n, weights, bias)
}

#[doc(hidden)]
pub fn bench_dense_backward(
    input: &[f64],
    dout: &[f64],
    out: usize,
    n: usize,
    weights: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    dense_backward(input, dout, out, n, weights)
}
