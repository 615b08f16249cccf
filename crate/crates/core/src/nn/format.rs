//! Versioned text serialization for networks.
//!
//! The format is line-oriented and self-describing: a header with the format
//! version and architecture manifest, then one block per layer with weights
//! and biases as base64 blobs of little-endian IEEE-754 doubles, row-major.
//! Round trips are bit-exact. See `docs/network-format.md` for the layout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;

use super::layer::Layer;
use super::network::{Head, HeadActivation, Metadata, Network, HEAD_NAMES};
use crate::error::{Error, Result};

const MAGIC: &str = "lesion-network";
const VERSION: &str = "v1";

pub(crate) fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

pub(crate) fn decode_f64s(text: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text.trim())
        .map_err(|e| Error::MalformedFile(format!("bad base64 blob: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::MalformedFile(format!(
            "blob holds {} bytes, expected {} ({} doubles)",
            bytes.len(),
            expected * 8,
            expected
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Serializes a network to the text format.
pub fn network_to_string(net: &Network) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let [c, h, w] = net.input_shape();
    let _ = writeln!(s, "input {c} {h} {w}");
    let _ = writeln!(s, "trial {}", net.metadata().trial_id);
    let _ = writeln!(s, "seed {}", net.metadata().seed);
    let mut loss = String::from("loss");
    for v in &net.metadata().loss_history {
        let _ = write!(loss, " {v}");
    }
    let _ = writeln!(s, "{loss}");
    let _ = writeln!(s, "trunk {}", net.trunk().len());
    for (i, layer) in net.trunk().iter().enumerate() {
        match layer {
            Layer::Conv2D {
                out_filters,
                in_channels,
                kh,
                kw,
                weights,
                bias,
            } => {
                let _ = writeln!(s, "layer {i} conv2d out={out_filters} in={in_channels} kh={kh} kw={kw}");
                let _ = writeln!(s, "w {}", encode_f64s(weights));
                let _ = writeln!(s, "b {}", encode_f64s(bias));
            }
            Layer::Dense {
                out,
                input,
                weights,
                bias,
            } => {
                let _ = writeln!(s, "layer {i} dense out={out} in={input}");
                let _ = writeln!(s, "w {}", encode_f64s(weights));
                let _ = writeln!(s, "b {}", encode_f64s(bias));
            }
            Layer::MaxPool2D { size, stride } => {
                let _ = writeln!(s, "layer {i} maxpool2d size={size} stride={stride}");
            }
            Layer::Dropout { rate } => {
                let _ = writeln!(s, "layer {i} dropout rate={rate}");
            }
            Layer::ReLU | Layer::Tanh | Layer::Sigmoid | Layer::Flatten => {
                let _ = writeln!(s, "layer {i} {}", layer.kind_name());
            }
        }
    }
    for (h, head) in net.heads().iter().enumerate() {
        let _ = writeln!(
            s,
            "head {} act={} in={}",
            HEAD_NAMES[h],
            head.activation.name(),
            head.weights.len()
        );
        let _ = writeln!(s, "w {}", encode_f64s(&head.weights));
        let _ = writeln!(s, "b {}", encode_f64s(&[head.bias]));
    }
    s.push_str("end\n");
    s
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, network_to_string(net))?;
    Ok(())
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    n: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            let line = self
                .iter
                .next()
                .ok_or_else(|| Error::MalformedFile("unexpected end of file".into()))?;
            self.n += 1;
            let trimmed = line.trim_end();
            if !trimmed.is_empty() {
                return Ok(trimmed);
            }
        }
    }

    fn expect_field<'b>(&self, line: &'b str, key: &str) -> Result<&'b str> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| {
                Error::MalformedFile(format!("line {}: expected '{key} ...', got '{line}'", self.n))
            })
    }
}

fn parse_kv(tokens: &[&str], key: &str, line_no: usize) -> Result<usize> {
    for t in tokens {
        if let Some(v) = t.strip_prefix(key).and_then(|r| r.strip_prefix('=')) {
            return v.parse().map_err(|_| {
                Error::MalformedFile(format!("line {line_no}: bad integer in '{t}'"))
            });
        }
    }
    Err(Error::MalformedFile(format!(
        "line {line_no}: missing field '{key}='"
    )))
}

/// Parses the text format back into a validated network.
pub fn network_from_str(text: &str) -> Result<Network> {
    let mut lines = Lines {
        iter: text.lines(),
        n: 0,
    };

    let header = lines.next()?;
    match header.split_once(' ') {
        Some((MAGIC, VERSION)) => {}
        Some((MAGIC, other)) => {
            return Err(Error::VersionMismatch {
                found: other.to_string(),
                expected: VERSION,
            })
        }
        _ => {
            return Err(Error::MalformedFile(format!(
                "not a network file (header '{header}')"
            )))
        }
    }

    let input_line = lines.next()?;
    let dims: Vec<usize> = lines
        .expect_field(input_line, "input")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::MalformedFile(format!("bad input shape '{input_line}'"))))
        .collect::<Result<_>>()?;
    let [c, h, w]: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::MalformedFile("input shape must have 3 extents".into()))?;

    let trial_line = lines.next()?;
    let trial_id: u32 = lines
        .expect_field(trial_line, "trial")?
        .parse()
        .map_err(|_| Error::MalformedFile(format!("bad trial id '{trial_line}'")))?;
    let seed_line = lines.next()?;
    let seed: u64 = lines
        .expect_field(seed_line, "seed")?
        .parse()
        .map_err(|_| Error::MalformedFile(format!("bad seed '{seed_line}'")))?;

    let loss_line = lines.next()?;
    if loss_line != "loss" && !loss_line.starts_with("loss ") {
        return Err(Error::MalformedFile(format!(
            "expected loss history line, got '{loss_line}'"
        )));
    }
    let loss_history: Vec<f64> = loss_line
        .split_whitespace()
        .skip(1)
        .map(|t| {
            t.parse()
                .map_err(|_| Error::MalformedFile(format!("bad loss value '{t}'")))
        })
        .collect::<Result<_>>()?;

    let trunk_line = lines.next()?;
    let n_layers: usize = lines
        .expect_field(trunk_line, "trunk")?
        .parse()
        .map_err(|_| Error::MalformedFile(format!("bad trunk count '{trunk_line}'")))?;

    let mut trunk = Vec::with_capacity(n_layers);
    for expect_idx in 0..n_layers {
        let line = lines.next()?;
        let rest = lines.expect_field(line, "layer")?;
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(Error::MalformedFile(format!(
                "line {}: layer line needs an index and a kind",
                lines.n
            )));
        }
        let idx: usize = tokens[0]
            .parse()
            .map_err(|_| Error::MalformedFile(format!("bad layer index '{}'", tokens[0])))?;
        if idx != expect_idx {
            return Err(Error::MalformedFile(format!(
                "layer index {idx} out of order (expected {expect_idx})"
            )));
        }
        let kind = tokens[1];
        let params = &tokens[2..];
        let layer = match kind {
            "conv2d" => {
                let out_filters = parse_kv(params, "out", lines.n)?;
                let in_channels = parse_kv(params, "in", lines.n)?;
                let kh = parse_kv(params, "kh", lines.n)?;
                let kw = parse_kv(params, "kw", lines.n)?;
                let wl = lines.next()?;
                let weights = decode_f64s(
                    lines.expect_field(wl, "w")?,
                    out_filters * in_channels * kh * kw,
                )?;
                let bl = lines.next()?;
                let bias = decode_f64s(lines.expect_field(bl, "b")?, out_filters)?;
                Layer::Conv2D {
                    out_filters,
                    in_channels,
                    kh,
                    kw,
                    weights,
                    bias,
                }
            }
            "dense" => {
                let out = parse_kv(params, "out", lines.n)?;
                let input = parse_kv(params, "in", lines.n)?;
                let wl = lines.next()?;
                let weights = decode_f64s(lines.expect_field(wl, "w")?, out * input)?;
                let bl = lines.next()?;
                let bias = decode_f64s(lines.expect_field(bl, "b")?, out)?;
                Layer::Dense {
                    out,
                    input,
                    weights,
                    bias,
                }
            }
            "maxpool2d" => Layer::MaxPool2D {
                size: parse_kv(params, "size", lines.n)?,
                stride: parse_kv(params, "stride", lines.n)?,
            },
            "dropout" => {
                let rate_tok = params
                    .iter()
                    .find_map(|t| t.strip_prefix("rate="))
                    .ok_or_else(|| {
                        Error::MalformedFile(format!("line {}: dropout needs rate=", lines.n))
                    })?;
                Layer::Dropout {
                    rate: rate_tok.parse().map_err(|_| {
                        Error::MalformedFile(format!("bad dropout rate '{rate_tok}'"))
                    })?,
                }
            }
            "relu" => Layer::ReLU,
            "tanh" => Layer::Tanh,
            "sigmoid" => Layer::Sigmoid,
            "flatten" => Layer::Flatten,
            other => {
                return Err(Error::MalformedFile(format!(
                    "line {}: unknown layer kind '{other}'",
                    lines.n
                )))
            }
        };
        trunk.push(layer);
    }

    let mut heads = Vec::with_capacity(3);
    for name in HEAD_NAMES {
        let line = lines.next()?;
        let rest = lines.expect_field(line, "head")?;
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        if tokens.first() != Some(&name) {
            return Err(Error::MalformedFile(format!(
                "line {}: expected head '{name}', got '{line}'",
                lines.n
            )));
        }
        let act = tokens
            .iter()
            .find_map(|t| t.strip_prefix("act="))
            .ok_or_else(|| Error::MalformedFile(format!("line {}: head needs act=", lines.n)))?;
        let activation = match act {
            "sigmoid" => HeadActivation::Sigmoid,
            "tanh" => HeadActivation::Tanh,
            other => {
                return Err(Error::MalformedFile(format!(
                    "unknown head activation '{other}'"
                )))
            }
        };
        let n_in = parse_kv(&tokens[1..], "in", lines.n)?;
        let wl = lines.next()?;
        let weights = decode_f64s(lines.expect_field(wl, "w")?, n_in)?;
        let bl = lines.next()?;
        let bias = decode_f64s(lines.expect_field(bl, "b")?, 1)?[0];
        heads.push(Head {
            activation,
            weights,
            bias,
        });
    }
    let heads: [Head; 3] = heads.try_into().expect("three heads collected");

    let tail = lines.next()?;
    if tail != "end" {
        return Err(Error::MalformedFile(format!(
            "expected 'end' terminator, got '{tail}'"
        )));
    }

    // Shape-chain validation happens in the constructor.
    Network::new(
        [c, h, w],
        trunk,
        heads,
        Metadata {
            trial_id,
            seed,
            loss_history,
        },
    )
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)?;
    network_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::Mode;
    use crate::nn::tensor::Tensor;
    use crate::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn roundtrip_preserves_forward_outputs_bit_exactly() {
        let net = Network::reference(9, 0.2);
        let text = network_to_string(&net);
        let back = network_from_str(&text).unwrap();
        assert_eq!(net, back);
        let mut rng = seeded_rng("format-roundtrip", 0);
        for _ in 0..100 {
            let img = Tensor::new(
                vec![1, 64, 64],
                (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap();
            let a = net.forward(&img, Mode::Eval, None).unwrap();
            let b = back.forward(&img, Mode::Eval, None).unwrap();
            assert_eq!(a.longitudinal.to_bits(), b.longitudinal.to_bits());
            assert_eq!(a.lateral.to_bits(), b.lateral.to_bits());
            assert_eq!(a.rotational.to_bits(), b.rotational.to_bits());
        }
    }

    #[test]
    fn loss_history_roundtrips() {
        let mut net = Network::reference(3, 0.2);
        net.metadata_mut().loss_history = vec![0.5, 0.25, 0.12500000001, 1e-17];
        let back = network_from_str(&network_to_string(&net)).unwrap();
        assert_eq!(net.metadata(), back.metadata());
    }

    #[test]
    fn version_mismatch_is_distinct() {
        let net = Network::reference(1, 0.2);
        let text = network_to_string(&net).replacen("v1", "v9", 1);
        match network_from_str(&text) {
            Err(Error::VersionMismatch { found, .. }) => assert_eq!(found, "v9"),
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_malformed() {
        let net = Network::reference(1, 0.2);
        let text = network_to_string(&net);
        let cut = &text[..text.len() / 2];
        match network_from_str(cut) {
            Err(Error::MalformedFile(_)) => {}
            other => panic!("expected malformed file, got {other:?}"),
        }
    }

    #[test]
    fn wrong_dense_row_count_is_a_shape_chain_error_naming_the_layer() {
        let net = Network::reference(1, 0.2);
        let text = network_to_string(&net);
        // Shrink the 400-wide dense layer declaration without touching its blob:
        // the blob length check fires first as malformed, so instead rewrite the
        // declared output size AND re-encode a wrong-sized weight blob.
        let mut out = String::new();
        let mut in_dense = false;
        for line in text.lines() {
            if line.starts_with("layer 14 dense") || line.starts_with("layer 13 dense") {
                // first dense layer line: claim 399 outputs
                let fixed = line.replace("out=400", "out=399");
                in_dense = fixed.contains("out=399");
                out.push_str(&fixed);
            } else if in_dense && line.starts_with("w ") {
                let weights = vec![0.0; 399 * 250];
                out.push_str(&format!("w {}", encode_f64s(&weights)));
            } else if in_dense && line.starts_with("b ") {
                let bias = vec![0.0; 399];
                out.push_str(&format!("b {}", encode_f64s(&bias)));
                in_dense = false;
            } else {
                out.push_str(line);
            }
            out.push('\n');
        }
        match network_from_str(&out) {
            Err(Error::ShapeChain { layer, .. }) => {
                // the mismatch is detected where the 400->200 chain breaks
                assert!(layer > 13, "error should name a layer at/after the dense block, got {layer}");
            }
            other => panic!("expected shape chain error, got {other:?}"),
        }
    }

    #[test]
    fn save_and_load_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.lnet");
        let net = Network::reference(12, 0.2);
        save_network(&net, &path).unwrap();
        let back = load_network(&path).unwrap();
        assert_eq!(net, back);
    }
}
