//! Synthetic wire images with ground-truth steering targets.
//!
//! Each image shows a single anti-aliased wire entering at bottom center and
//! running upward, either bending left, bending right, or staying straight.
//! The ground-truth action is derived from the geometry: lateral command
//! follows the curvature (left positive), rotational command follows the
//! tangent angle at the middle of the visible arc, and the longitudinal
//! command is always full forward.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Action, Tensor};
use crate::rng::{mix, seeded_rng};

pub const IMAGE_SIDE: usize = 64;
pub const PROBE_PER_CATEGORY: usize = 8;
pub const PROBE_SIZE: usize = 3 * PROBE_PER_CATEGORY;

/// Curvature gain mapping wire curvature (1/px) to the lateral command.
const LATERAL_GAIN: f64 = 40.0;
/// Curvature magnitude range for turning wires, in 1/px.
const CURVATURE_RANGE: (f64, f64) = (0.012, 0.018);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireCategory {
    LeftTurn,
    RightTurn,
    Straight,
}

impl WireCategory {
    pub const ALL: [WireCategory; 3] = [
        WireCategory::LeftTurn,
        WireCategory::RightTurn,
        WireCategory::Straight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WireCategory::LeftTurn => "left_turn",
            WireCategory::RightTurn => "right_turn",
            WireCategory::Straight => "straight",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "left_turn" => Ok(WireCategory::LeftTurn),
            "right_turn" => Ok(WireCategory::RightTurn),
            "straight" => Ok(WireCategory::Straight),
            other => Err(Error::InvalidInput(format!("unknown category '{other}'"))),
        }
    }
}

impl fmt::Display for WireCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireImage {
    pub pixels: Tensor,
    pub category: WireCategory,
    pub target: Action,
    pub seed: u64,
}

/// Renders one wire image; deterministic in `(category, seed)`.
pub fn generate_wire_image(category: WireCategory, seed: u64) -> WireImage {
    let domain_salt = match category {
        WireCategory::LeftTurn => 1,
        WireCategory::RightTurn => 2,
        WireCategory::Straight => 3,
    };
    let mut rng = seeded_rng("wire-image", mix(seed, domain_salt));

    let x0 = 31.5 + rng.gen_range(-4.0..4.0);
    let curvature = match category {
        WireCategory::LeftTurn => rng.gen_range(CURVATURE_RANGE.0..CURVATURE_RANGE.1),
        WireCategory::RightTurn => -rng.gen_range(CURVATURE_RANGE.0..CURVATURE_RANGE.1),
        WireCategory::Straight => 0.0,
    };
    let half_width = rng.gen_range(1.0..1.6);
    let aa = 1.0;

    // Trace the arc upward from bottom center until it leaves the frame.
    let ds = 0.25;
    let margin = half_width + aa + 1.0;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let (mut x, mut y) = (x0, 63.5);
    let mut arc_len = 0.0;
    loop {
        pts.push((x, y));
        let theta = curvature * arc_len;
        x -= theta.sin() * ds; // positive curvature bends toward image left
        y -= theta.cos() * ds;
        arc_len += ds;
        let inside = x > -margin && x < IMAGE_SIDE as f64 + margin && y > -margin;
        if !inside || pts.len() > 4096 {
            break;
        }
    }

    // Distance-field splat: each sample point lowers the distance of nearby
    // pixels, then intensity falls off linearly over the anti-alias band.
    let side = IMAGE_SIDE;
    let mut dist = vec![f64::INFINITY; side * side];
    let reach = (half_width + aa).ceil() as i64 + 1;
    for &(px, py) in &pts {
        let cx = px.round() as i64;
        let cy = py.round() as i64;
        for gy in (cy - reach).max(0)..=(cy + reach).min(side as i64 - 1) {
            for gx in (cx - reach).max(0)..=(cx + reach).min(side as i64 - 1) {
                let dx = gx as f64 + 0.5 - px;
                let dy = gy as f64 + 0.5 - py;
                let d = (dx * dx + dy * dy).sqrt();
                let cell = &mut dist[gy as usize * side + gx as usize];
                if d < *cell {
                    *cell = d;
                }
            }
        }
    }
    let pixels: Vec<f64> = dist
        .iter()
        .map(|&d| ((half_width + aa - d) / aa).clamp(0.0, 1.0))
        .collect();
    let pixels = Tensor::new(vec![1, side, side], pixels).expect("image buffer sized");

    let mid_theta = curvature * arc_len / 2.0;
    let target = Action {
        longitudinal: 1.0,
        lateral: LATERAL_GAIN * curvature,
        rotational: mid_theta / std::f64::consts::FRAC_PI_2,
    };
    debug_assert!(match category {
        WireCategory::LeftTurn => target.lateral > 0.0,
        WireCategory::RightTurn => target.lateral < 0.0,
        WireCategory::Straight => target.lateral.abs() <= 0.05,
    });
    WireImage {
        pixels,
        category,
        target,
        seed,
    }
}

/// The labeled image set shared by all trials: 8 left turns, then 8 right
/// turns, then 8 straight wires, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub seed: u64,
    pub images: Vec<WireImage>,
}

pub fn build_probe_set(seed: u64) -> ProbeSet {
    let mut images = Vec::with_capacity(PROBE_SIZE);
    for (c, category) in WireCategory::ALL.into_iter().enumerate() {
        for i in 0..PROBE_PER_CATEGORY {
            let image_seed = mix(seed, (c * PROBE_PER_CATEGORY + i) as u64);
            images.push(generate_wire_image(category, image_seed));
        }
    }
    ProbeSet { seed, images }
}

impl ProbeSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Probe serialization (same blob encoding as the network format)
// ---------------------------------------------------------------------------

const PROBE_MAGIC: &str = "lesion-probe";
const PROBE_VERSION: &str = "v1";

pub fn probe_to_string(probe: &ProbeSet) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "{PROBE_MAGIC} {PROBE_VERSION}");
    let _ = writeln!(s, "seed {}", probe.seed);
    let _ = writeln!(s, "count {}", probe.images.len());
    for (i, img) in probe.images.iter().enumerate() {
        let _ = writeln!(s, "image {i} category={} seed={}", img.category, img.seed);
        let _ = writeln!(
            s,
            "target {} {} {}",
            img.target.longitudinal, img.target.lateral, img.target.rotational
        );
        let shape = img.pixels.shape();
        let _ = writeln!(s, "shape {} {} {}", shape[0], shape[1], shape[2]);
        let _ = writeln!(s, "pixels {}", crate::nn::encode_f64s(img.pixels.data()));
    }
    s.push_str("end\n");
    s
}

pub fn probe_from_str(text: &str) -> Result<ProbeSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<&str> {
        lines
            .next()
            .ok_or_else(|| Error::MalformedFile(format!("probe file ended before {what}")))
    };

    let header = next("header")?;
    match header.split_once(' ') {
        Some((PROBE_MAGIC, PROBE_VERSION)) => {}
        Some((PROBE_MAGIC, other)) => {
            return Err(Error::VersionMismatch {
                found: other.to_string(),
                expected: PROBE_VERSION,
            })
        }
        _ => {
            return Err(Error::MalformedFile(format!(
                "not a probe file (header '{header}')"
            )))
        }
    }
    let seed: u64 = next("seed")?
        .strip_prefix("seed ")
        .ok_or_else(|| Error::MalformedFile("expected seed line".into()))?
        .parse()
        .map_err(|_| Error::MalformedFile("bad probe seed".into()))?;
    let count: usize = next("count")?
        .strip_prefix("count ")
        .ok_or_else(|| Error::MalformedFile("expected count line".into()))?
        .parse()
        .map_err(|_| Error::MalformedFile("bad probe count".into()))?;

    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let head = next("image header")?;
        let rest = head
            .strip_prefix(&format!("image {i} "))
            .ok_or_else(|| Error::MalformedFile(format!("expected 'image {i} ...', got '{head}'")))?;
        let mut category = None;
        let mut img_seed = None;
        for tok in rest.split_whitespace() {
            if let Some(v) = tok.strip_prefix("category=") {
                category = Some(WireCategory::from_name(v)?);
            } else if let Some(v) = tok.strip_prefix("seed=") {
                img_seed = Some(
                    v.parse::<u64>()
                        .map_err(|_| Error::MalformedFile("bad image seed".into()))?,
                );
            }
        }
        let category =
            category.ok_or_else(|| Error::MalformedFile(format!("image {i} missing category")))?;
        let img_seed =
            img_seed.ok_or_else(|| Error::MalformedFile(format!("image {i} missing seed")))?;

        let target_line = next("target")?;
        let vals: Vec<f64> = target_line
            .strip_prefix("target ")
            .ok_or_else(|| Error::MalformedFile("expected target line".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::MalformedFile(format!("bad target value '{t}'")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(Error::MalformedFile("target needs 3 components".into()));
        }
        let shape_line = next("shape")?;
        let dims: Vec<usize> = shape_line
            .strip_prefix("shape ")
            .ok_or_else(|| Error::MalformedFile("expected shape line".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::MalformedFile(format!("bad shape extent '{t}'")))
            })
            .collect::<Result<_>>()?;
        let pixel_line = next("pixels")?;
        let blob = pixel_line
            .strip_prefix("pixels ")
            .ok_or_else(|| Error::MalformedFile("expected pixels line".into()))?;
        let data = crate::nn::decode_f64s(blob, dims.iter().product())?;
        images.push(WireImage {
            pixels: Tensor::new(dims, data)?,
            category,
            target: Action {
                longitudinal: vals[0],
                lateral: vals[1],
                rotational: vals[2],
            },
            seed: img_seed,
        });
    }
    if next("end")? != "end" {
        return Err(Error::MalformedFile("expected 'end' terminator".into()));
    }
    Ok(ProbeSet { seed, images })
}

pub fn save_probe_set(probe: &ProbeSet, path: &Path) -> Result<()> {
    fs::write(path, probe_to_string(probe))?;
    Ok(())
}

pub fn load_probe_set(path: &Path) -> Result<ProbeSet> {
    probe_from_str(&fs::read_to_string(path)?)
}
