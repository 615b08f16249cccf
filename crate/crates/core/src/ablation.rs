//! Group-wise knockout of a dense layer and the resulting output deltas.
//!
//! A partition slices the target layer's units into groups. Ablating a group
//! zeroes the group's incoming weight rows and biases plus its outgoing
//! columns in the next dense layer (or the heads); with ReLU units this is
//! exactly equivalent to forcing the group's activations to zero. Exactly
//! one group is zeroed per evaluated network, always on a copy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Action, Layer, Mode, Network};
use crate::rng::seeded_rng;
use crate::textfmt::g17;
use crate::wire::{ProbeSet, WireCategory};

/// Disjoint neuron groups of one trunk layer, covering it exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    layer_index: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
}

fn dense_width(net: &Network, layer_index: usize) -> Result<usize> {
    match net.trunk().get(layer_index) {
        Some(Layer::Dense { out, .. }) => Ok(*out),
        Some(other) => Err(Error::InvalidPartition(format!(
            "layer {layer_index} is {}, ablation targets dense layers",
            other.kind_name()
        ))),
        None => Err(Error::InvalidPartition(format!(
            "layer index {layer_index} out of range (trunk has {} layers)",
            net.trunk().len()
        ))),
    }
}

/// Contiguous equal slices of the target dense layer; when `n_groups` does
/// not divide the width, the remainder goes one unit per leading group.
pub fn partition_layer(net: &Network, layer_index: usize, n_groups: usize) -> Result<GroupPartition> {
    let width = dense_width(net, layer_index)?;
    if n_groups == 0 || n_groups > width {
        return Err(Error::InvalidPartition(format!(
            "cannot split {width} units into {n_groups} groups"
        )));
    }
    let base = width / n_groups;
    let remainder = width % n_groups;
    let mut groups = Vec::with_capacity(n_groups);
    let mut start = 0;
    for g in 0..n_groups {
        let size = base + usize::from(g < remainder);
        groups.push((start..start + size).collect());
        start += size;
    }
    Ok(GroupPartition {
        layer_index,
        groups,
    })
}

/// Alternative grouping for granularity studies: same group sizes, but unit
/// membership shuffled by seed instead of spatially contiguous.
pub fn partition_layer_shuffled(
    net: &Network,
    layer_index: usize,
    n_groups: usize,
    seed: u64,
) -> Result<GroupPartition> {
    use rand::seq::SliceRandom;
    let contiguous = partition_layer(net, layer_index, n_groups)?;
    let width = dense_width(net, layer_index)?;
    let mut units: Vec<usize> = (0..width).collect();
    units.shuffle(&mut seeded_rng("shuffled-partition", seed));
    let mut groups = Vec::with_capacity(n_groups);
    let mut start = 0;
    for g in contiguous.groups() {
        let mut members: Vec<usize> = units[start..start + g.len()].to_vec();
        members.sort_unstable();
        groups.push(members);
        start += g.len();
    }
    Ok(GroupPartition {
        layer_index,
        groups,
    })
}

/// The conventional target: 10 contiguous groups over the last dense trunk
/// layer (the 200-unit layer in the reference architecture).
pub fn default_partition(net: &Network) -> Result<GroupPartition> {
    let layer_index = net
        .last_dense_index()
        .ok_or_else(|| Error::InvalidPartition("network has no dense trunk layer".into()))?;
    partition_layer(net, layer_index, 10)
}

/// Finds the layer whose weight columns consume the target layer's units:
/// the next dense layer downstream, or the heads if none exists. Only
/// elementwise layers may sit in between, otherwise unit indices would not
/// correspond one-to-one.
fn outgoing_dense(net: &Network, layer_index: usize) -> Result<Option<usize>> {
    for (i, layer) in net.trunk().iter().enumerate().skip(layer_index + 1) {
        match layer {
            Layer::Dense { .. } => return Ok(Some(i)),
            Layer::ReLU | Layer::Tanh | Layer::Sigmoid | Layer::Dropout { .. } => {}
            other => {
                return Err(Error::InvalidPartition(format!(
                    "layer {i} ({}) between ablation target and next dense layer breaks \
                     unit correspondence",
                    other.kind_name()
                )))
            }
        }
    }
    Ok(None)
}

/// Returns a copy of the network with one group knocked out; the original is
/// untouched.
pub fn ablate_group(net: &Network, partition: &GroupPartition, group_id: usize) -> Result<Network> {
    let members = partition
        .groups()
        .get(group_id)
        .ok_or(Error::InvalidGroup {
            group: group_id,
            n_groups: partition.n_groups(),
        })?
        .clone();
    let layer_index = partition.layer_index();
    dense_width(net, layer_index)?;
    let out_dense = outgoing_dense(net, layer_index)?;

    let mut ablated = net.clone();
    match &mut ablated.trunk_mut()[layer_index] {
        Layer::Dense {
            input: n, weights, bias, ..
        } => {
            for &unit in &members {
                weights[unit * *n..(unit + 1) * *n].fill(0.0);
                bias[unit] = 0.0;
            }
        }
        _ => unreachable!("validated as dense above"),
    }
    match out_dense {
        Some(next) => match &mut ablated.trunk_mut()[next] {
            Layer::Dense {
                out, input: n, weights, ..
            } => {
                for row in 0..*out {
                    for &unit in &members {
                        weights[row * *n + unit] = 0.0;
                    }
                }
            }
            _ => unreachable!("outgoing_dense returns dense indices"),
        },
        None => {
            for head in ablated.heads_mut() {
                for &unit in &members {
                    head.weights[unit] = 0.0;
                }
            }
        }
    }
    Ok(ablated)
}

/// Eval-mode outputs for every probe image, in probe order.
pub fn compute_baseline(net: &Network, probe: &ProbeSet) -> Result<Vec<Action>> {
    probe
        .images
        .iter()
        .map(|img| net.forward(&img.pixels, Mode::Eval, None))
        .collect()
}

/// Output change of one ablation group on every probe image.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationDelta {
    pub trial_id: u32,
    pub group_id: usize,
    pub baseline: Vec<Action>,
    pub ablated: Vec<Action>,
    /// `ablated - baseline` per component, per image.
    pub delta: Vec<[f64; 3]>,
}

/// Verifies the single-ablation protocol: apart from the target group's
/// incoming rows/bias and its outgoing columns, the ablated copy is
/// bit-identical to the source network.
fn assert_single_ablation(
    original: &Network,
    ablated: &Network,
    partition: &GroupPartition,
    group_id: usize,
) {
    let members = &partition.groups()[group_id];
    let is_member = |u: usize| members.binary_search(&u).is_ok();
    let layer_index = partition.layer_index();
    let out_dense = outgoing_dense(original, layer_index).expect("validated");

    for (i, (a, b)) in original.trunk().iter().zip(ablated.trunk()).enumerate() {
        if i == layer_index {
            let (Layer::Dense { input: n, weights: wa, bias: ba, .. },
                 Layer::Dense { weights: wb, bias: bb, .. }) = (a, b)
            else {
                panic!("target layer must stay dense");
            };
            for unit in 0..ba.len() {
                if is_member(unit) {
                    assert!(wb[unit * n..(unit + 1) * n].iter().all(|v| *v == 0.0));
                    assert_eq!(bb[unit], 0.0);
                } else {
                    assert_eq!(&wa[unit * n..(unit + 1) * n], &wb[unit * n..(unit + 1) * n]);
                    assert_eq!(ba[unit].to_bits(), bb[unit].to_bits());
                }
            }
        } else if Some(i) == out_dense {
            let (Layer::Dense { out, input: n, weights: wa, bias: ba, .. },
                 Layer::Dense { weights: wb, bias: bb, .. }) = (a, b)
            else {
                panic!("outgoing layer must stay dense");
            };
            assert_eq!(ba, bb);
            for row in 0..*out {
                for col in 0..*n {
                    let (va, vb) = (wa[row * n + col], wb[row * n + col]);
                    if is_member(col) {
                        assert_eq!(vb, 0.0);
                    } else {
                        assert_eq!(va.to_bits(), vb.to_bits());
                    }
                }
            }
        } else {
            assert_eq!(a, b, "layer {i} must be untouched");
        }
    }
    if out_dense.is_none() {
        for (ha, hb) in original.heads().iter().zip(ablated.heads()) {
            assert_eq!(ha.bias.to_bits(), hb.bias.to_bits());
            for (col, (va, vb)) in ha.weights.iter().zip(&hb.weights).enumerate() {
                if is_member(col) {
                    assert_eq!(*vb, 0.0);
                } else {
                    assert_eq!(va.to_bits(), vb.to_bits());
                }
            }
        }
    } else {
        assert_eq!(original.heads(), ablated.heads());
    }
}

/// Ablates each group in turn (independent copies, evaluated in parallel)
/// and records the per-image output deltas against the shared baseline.
pub fn compute_deltas(
    net: &Network,
    probe: &ProbeSet,
    partition: &GroupPartition,
) -> Result<Vec<AblationDelta>> {
    let baseline = compute_baseline(net, probe)?;
    let trial_id = net.metadata().trial_id;
    (0..partition.n_groups())
        .into_par_iter()
        .map(|group_id| {
            let ablated_net = ablate_group(net, partition, group_id)?;
            assert_single_ablation(net, &ablated_net, partition, group_id);
            let ablated = compute_baseline(&ablated_net, probe)?;
            let delta = baseline
                .iter()
                .zip(&ablated)
                .map(|(b, a)| {
                    [
                        a.longitudinal - b.longitudinal,
                        a.lateral - b.lateral,
                        a.rotational - b.rotational,
                    ]
                })
                .collect();
            Ok(AblationDelta {
                trial_id,
                group_id,
                baseline: baseline.clone(),
                ablated,
                delta,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV export / import
// ---------------------------------------------------------------------------

pub const DELTA_CSV_HEADER: &str = "trial,group,image_id,category,component,baseline,ablated,delta";
const COMPONENT_NAMES: [&str; 3] = ["longitudinal", "lateral", "rotational"];

/// One row per (trial, group, image, component), floats at 17 significant
/// digits so the file reparses to identical bits.
pub fn deltas_to_csv(deltas_by_trial: &[Vec<AblationDelta>], probe: &ProbeSet) -> String {
    let mut s = String::from(DELTA_CSV_HEADER);
    s.push('\n');
    for trial in deltas_by_trial {
        for d in trial {
            for (img_id, img) in probe.images.iter().enumerate() {
                let base = d.baseline[img_id].components();
                let abl = d.ablated[img_id].components();
                for (c, name) in COMPONENT_NAMES.iter().enumerate() {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        d.trial_id,
                        d.group_id,
                        img_id,
                        img.category,
                        name,
                        g17(base[c]),
                        g17(abl[c]),
                        g17(d.delta[img_id][c]),
                    ));
                }
            }
        }
    }
    s
}

/// Reparses a delta CSV (as produced by [`deltas_to_csv`]) into per-trial
/// delta lists, validating the layout invariants: rows in writer order, a
/// shared baseline across all groups of a trial, and consistent image
/// categories across trials.
pub fn deltas_from_csv(text: &str) -> Result<Vec<Vec<AblationDelta>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == DELTA_CSV_HEADER => {}
        other => {
            return Err(Error::MalformedFile(format!(
                "bad delta CSV header: {other:?}"
            )))
        }
    }

    struct Row {
        trial: u32,
        group: usize,
        image: usize,
        component: usize,
        baseline: f64,
        ablated: f64,
        delta: f64,
    }
    let mut rows = Vec::new();
    let mut categories: Vec<(usize, String)> = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::MalformedFile(format!(
                "delta CSV row {} has {} fields, expected 8",
                n + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::MalformedFile(format!("bad float '{s}' in delta CSV")))
        };
        let component = COMPONENT_NAMES
            .iter()
            .position(|c| *c == fields[4])
            .ok_or_else(|| Error::MalformedFile(format!("unknown component '{}'", fields[4])))?;
        WireCategory::from_name(fields[3])
            .map_err(|_| Error::MalformedFile(format!("unknown category '{}'", fields[3])))?;
        let image: usize = fields[2]
            .parse()
            .map_err(|_| Error::MalformedFile(format!("bad image id '{}'", fields[2])))?;
        categories.push((image, fields[3].to_string()));
        rows.push(Row {
            trial: fields[0]
                .parse()
                .map_err(|_| Error::MalformedFile(format!("bad trial id '{}'", fields[0])))?,
            group: fields[1]
                .parse()
                .map_err(|_| Error::MalformedFile(format!("bad group id '{}'", fields[1])))?,
            image,
            component,
            baseline: parse_f(fields[5])?,
            ablated: parse_f(fields[6])?,
            delta: parse_f(fields[7])?,
        });
    }
    if rows.is_empty() {
        return Err(Error::MalformedFile("delta CSV has no rows".into()));
    }
    // categories must be consistent per image id
    let mut cat_by_image: Vec<Option<String>> = Vec::new();
    for (image, cat) in categories {
        if cat_by_image.len() <= image {
            cat_by_image.resize(image + 1, None);
        }
        match &cat_by_image[image] {
            None => cat_by_image[image] = Some(cat),
            Some(existing) if *existing == cat => {}
            Some(existing) => {
                return Err(Error::MalformedFile(format!(
                    "image {image} labeled both '{existing}' and '{cat}'"
                )))
            }
        }
    }

    let n_images = cat_by_image.len();
    if rows.len() % (n_images * 3) != 0 {
        return Err(Error::MalformedFile(
            "delta CSV row count is not a whole number of (group x image x component) blocks".into(),
        ));
    }

    let mut by_trial: Vec<Vec<AblationDelta>> = Vec::new();
    for block in rows.chunks(n_images * 3) {
        let (trial, group) = (block[0].trial, block[0].group);
        let mut baseline = Vec::with_capacity(n_images);
        let mut ablated = Vec::with_capacity(n_images);
        let mut delta = Vec::with_capacity(n_images);
        for (img_id, img_rows) in block.chunks(3).enumerate() {
            let mut b = [0.0; 3];
            let mut a = [0.0; 3];
            let mut d = [0.0; 3];
            for (c, row) in img_rows.iter().enumerate() {
                if row.trial != trial || row.group != group || row.image != img_id || row.component != c {
                    return Err(Error::MalformedFile(format!(
                        "delta CSV rows out of writer order near trial {trial} group {group} image {img_id}"
                    )));
                }
                b[c] = row.baseline;
                a[c] = row.ablated;
                d[c] = row.delta;
            }
            baseline.push(Action { longitudinal: b[0], lateral: b[1], rotational: b[2] });
            ablated.push(Action { longitudinal: a[0], lateral: a[1], rotational: a[2] });
            delta.push(d);
        }
        let entry = AblationDelta {
            trial_id: trial,
            group_id: group,
            baseline,
            ablated,
            delta,
        };
        match by_trial.last_mut() {
            Some(current) if current[0].trial_id == trial => {
                if current[0].baseline != entry.baseline {
                    return Err(Error::MalformedFile(format!(
                        "trial {trial} groups disagree on the baseline"
                    )));
                }
                current.push(entry);
            }
            _ => by_trial.push(vec![entry]),
        }
    }
    let n_groups = by_trial[0].len();
    if by_trial.iter().any(|t| t.len() != n_groups) {
        return Err(Error::MalformedFile(
            "trials have differing group counts".into(),
        ));
    }
    Ok(by_trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{network_to_string, ActivationMask, Tensor};
    use crate::wire::build_probe_set;
    use rand::Rng;

    #[test]
    fn partition_200_into_10_gives_20_wide_slices() {
        let net = Network::reference(1, 0.2);
        let p = default_partition(&net).unwrap();
        assert_eq!(p.n_groups(), 10);
        for (g, members) in p.groups().iter().enumerate() {
            let expect: Vec<usize> = (g * 20..(g + 1) * 20).collect();
            assert_eq!(members, &expect);
        }
    }

    #[test]
    fn partition_into_singletons() {
        let net = Network::reference(1, 0.2);
        let idx = net.last_dense_index().unwrap();
        let p = partition_layer(&net, idx, 200).unwrap();
        assert_eq!(p.n_groups(), 200);
        assert!(p.groups().iter().all(|g| g.len() == 1));
    }

    #[test]
    fn remainder_goes_to_leading_groups() {
        // A toy net with a 7-unit dense layer.
        use crate::nn::{Head, HeadActivation, Metadata};
        let trunk = vec![
            Layer::Flatten,
            Layer::Dense {
                out: 7,
                input: 4,
                weights: vec![0.1; 28],
                bias: vec![0.0; 7],
            },
            Layer::ReLU,
        ];
        let heads = [
            Head { activation: HeadActivation::Sigmoid, weights: vec![0.1; 7], bias: 0.0 },
            Head { activation: HeadActivation::Tanh, weights: vec![0.1; 7], bias: 0.0 },
            Head { activation: HeadActivation::Tanh, weights: vec![0.1; 7], bias: 0.0 },
        ];
        let net = Network::new([1, 2, 2], trunk, heads, Metadata::default()).unwrap();
        let p = partition_layer(&net, 1, 3).unwrap();
        let sizes: Vec<usize> = p.groups().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        assert_eq!(p.groups()[0], vec![0, 1, 2]);
        assert_eq!(p.groups()[2], vec![5, 6]);
    }

    #[test]
    fn too_many_groups_is_an_error() {
        let net = Network::reference(1, 0.2);
        let idx = net.last_dense_index().unwrap();
        assert!(partition_layer(&net, idx, 201).is_err());
        assert!(partition_layer(&net, idx, 0).is_err());
    }

    #[test]
    fn shuffled_partition_covers_all_units_once() {
        let net = Network::reference(1, 0.2);
        let idx = net.last_dense_index().unwrap();
        let p = partition_layer_shuffled(&net, idx, 10, 3).unwrap();
        let mut all: Vec<usize> = p.groups().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        assert_ne!(p.groups(), partition_layer(&net, idx, 10).unwrap().groups());
    }

    #[test]
    fn ablation_equals_activation_masking() {
        let net = Network::reference(21, 0.2);
        let partition = default_partition(&net).unwrap();
        let mut rng = crate::rng::seeded_rng("ablate-vs-mask", 0);
        for _ in 0..10 {
            let group = rng.gen_range(0..partition.n_groups());
            let img = Tensor::new(
                vec![1, 64, 64],
                (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap();
            let surgical = ablate_group(&net, &partition, group)
                .unwrap()
                .forward(&img, Mode::Eval, None)
                .unwrap();
            let mask = ActivationMask::new(
                partition.layer_index(),
                partition.groups()[group].iter().copied(),
            );
            let masked = net.forward(&img, Mode::Eval, Some(&mask)).unwrap();
            for (a, b) in surgical.components().iter().zip(masked.components()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn ablating_an_already_zero_group_changes_nothing() {
        let net = Network::reference(5, 0.2);
        let partition = default_partition(&net).unwrap();
        let pre_zeroed = ablate_group(&net, &partition, 3).unwrap();
        let again = ablate_group(&pre_zeroed, &partition, 3).unwrap();
        assert_eq!(pre_zeroed, again);
        let probe = build_probe_set(2);
        let base = compute_baseline(&pre_zeroed, &probe).unwrap();
        let re = compute_baseline(&again, &probe).unwrap();
        assert_eq!(base, re);
    }

    #[test]
    fn source_network_is_untouched_by_a_full_delta_pass() {
        let net = Network::reference(8, 0.2);
        let before = network_to_string(&net);
        let probe = build_probe_set(8);
        let partition = default_partition(&net).unwrap();
        let deltas = compute_deltas(&net, &probe, &partition).unwrap();
        assert_eq!(deltas.len(), 10);
        assert_eq!(network_to_string(&net), before);
    }

    #[test]
    fn zero_network_has_all_zero_deltas_and_center_baseline() {
        let net = Network::reference_zero();
        let probe = build_probe_set(1);
        let baseline = compute_baseline(&net, &probe).unwrap();
        for b in &baseline {
            assert_eq!(
                *b,
                Action { longitudinal: 0.5, lateral: 0.0, rotational: 0.0 }
            );
        }
        let partition = default_partition(&net).unwrap();
        let deltas = compute_deltas(&net, &probe, &partition).unwrap();
        for d in &deltas {
            assert!(d.delta.iter().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn whole_layer_group_matches_head_bias_closed_form() {
        let mut net = Network::reference(13, 0.2);
        // Give the heads nonzero biases so the closed form is nontrivial.
        net.heads_mut()[0].bias = 0.3;
        net.heads_mut()[1].bias = -0.7;
        net.heads_mut()[2].bias = 0.2;
        let idx = net.last_dense_index().unwrap();
        let partition = partition_layer(&net, idx, 1).unwrap();
        let probe = build_probe_set(3);
        let deltas = compute_deltas(&net, &probe, &partition).unwrap();
        // With the whole layer gone the trunk output is zero, so each head
        // squashes only its own bias.
        let expect = Action {
            longitudinal: 1.0 / (1.0 + (-0.3f64).exp()),
            lateral: (-0.7f64).tanh(),
            rotational: (0.2f64).tanh(),
        };
        for a in &deltas[0].ablated {
            assert!((a.longitudinal - expect.longitudinal).abs() < 1e-12);
            assert!((a.lateral - expect.lateral).abs() < 1e-12);
            assert!((a.rotational - expect.rotational).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_group_id_is_rejected() {
        let net = Network::reference(1, 0.2);
        let partition = default_partition(&net).unwrap();
        match ablate_group(&net, &partition, 10) {
            Err(Error::InvalidGroup { group: 10, n_groups: 10 }) => {}
            other => panic!("expected invalid group, got {other:?}"),
        }
    }

    #[test]
    fn union_ablation_is_not_the_sum_of_single_ablations() {
        // Deltas do not add across groups: knocking out A and B together is
        // generally different from delta(A) + delta(B) because of the
        // nonlinear heads and ReLU trunk. Documented here, not relied upon.
        let net = Network::reference(30, 0.2);
        let partition = default_partition(&net).unwrap();
        let probe = build_probe_set(30);
        let img = &probe.images[0].pixels;
        let base = net.forward(img, Mode::Eval, None).unwrap();
        let single = |g: usize| {
            let out = ablate_group(&net, &partition, g)
                .unwrap()
                .forward(img, Mode::Eval, None)
                .unwrap();
            [
                out.longitudinal - base.longitudinal,
                out.lateral - base.lateral,
                out.rotational - base.rotational,
            ]
        };
        let da = single(0);
        let db = single(1);
        // Union via masking both groups (equivalent to double surgery).
        let union_mask = ActivationMask::new(
            partition.layer_index(),
            partition.groups()[0].iter().chain(&partition.groups()[1]).copied(),
        );
        let union_out = net.forward(img, Mode::Eval, Some(&union_mask)).unwrap();
        let d_union = [
            union_out.longitudinal - base.longitudinal,
            union_out.lateral - base.lateral,
            union_out.rotational - base.rotational,
        ];
        let additivity_gap: f64 = (0..3).map(|c| (d_union[c] - da[c] - db[c]).abs()).sum();
        assert!(
            additivity_gap > 1e-6,
            "this seed was chosen to demonstrate non-additivity, gap {additivity_gap}"
        );
    }

    #[test]
    fn delta_csv_roundtrips() {
        let net = Network::reference(2, 0.2);
        let probe = build_probe_set(2);
        let partition = partition_layer(&net, net.last_dense_index().unwrap(), 4).unwrap();
        let mut net0 = net.clone();
        net0.metadata_mut().trial_id = 0;
        let mut net1 = Network::reference(3, 0.2);
        net1.metadata_mut().trial_id = 1;
        let by_trial = vec![
            compute_deltas(&net0, &probe, &partition).unwrap(),
            compute_deltas(&net1, &probe, &partition).unwrap(),
        ];
        let csv = deltas_to_csv(&by_trial, &probe);
        assert_eq!(
            csv.lines().count(),
            1 + 2 * 4 * probe.len() * 3,
            "header plus one row per (trial, group, image, component)"
        );
        let back = deltas_from_csv(&csv).unwrap();
        assert_eq!(by_trial, back);
    }
}
