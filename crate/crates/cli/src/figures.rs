//! SVG figures rendered from the report bundle (never from live analysis).
//!
//! - fig2: grouped bars of one trial's per-group output deltas on one image
//! - fig3: PCA scatter with cluster colors, per-trial marker shapes, and
//!   nearest-centroid regions rasterized in the projected plane
//! - fig4: per-cluster mean action change bars

use lesion_core::textfmt::g6;

use crate::svg::{cluster_color, trial_marker, SvgCanvas};

pub struct PcaPoint {
    pub trial: u32,
    pub group: usize,
    pub label: usize,
    pub pc: [f64; 2],
}

pub struct CentroidPoint {
    pub cluster: usize,
    pub pc: [f64; 2],
}

pub struct ClusterMeans {
    pub cluster: usize,
    pub n_members: usize,
    pub coverage: usize,
    pub mean: [f64; 3],
}

struct Axis {
    lo: f64,
    hi: f64,
    px0: f64,
    px1: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px0: f64, px1: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        };
        Self { lo, hi, px0, px1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.px0 + (v - self.lo) / (self.hi - self.lo) * (self.px1 - self.px0)
    }
}

fn value_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Grouped bar chart of one (trial, image): a lateral and a rotational bar
/// per ablation group.
pub fn fig2_group_deltas(
    trial: u32,
    image_id: usize,
    per_group: &[[f64; 3]],
) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 55.0);
    let mut svg = SvgCanvas::new(w, h);
    svg.rect(0.0, 0.0, w, h, "#ffffff", "");
    svg.text(w / 2.0, 22.0, 14.0, "middle", &format!(
        "Per-group output change, trial {trial}, image {image_id}"
    ));

    let (lo, hi) = value_range(per_group.iter().flat_map(|d| [d[1], d[2]]).chain([0.0]));
    let pad = 0.08 * (hi - lo).max(1e-9);
    let y = Axis::new(lo - pad, hi + pad, h - mb, mt);
    let x = Axis::new(0.0, per_group.len() as f64, ml, w - mr);

    // axes and zero line
    svg.line(ml, mt, ml, h - mb, "#000000", 1.0);
    svg.line(ml, h - mb, w - mr, h - mb, "#000000", 1.0);
    let zero_y = y.map(0.0);
    svg.line(ml, zero_y, w - mr, zero_y, "#888888", 0.8);
    for v in [y.lo, 0.0, y.hi] {
        let yy = y.map(v);
        svg.line(ml - 4.0, yy, ml, yy, "#000000", 1.0);
        svg.text(ml - 7.0, yy + 3.5, 10.0, "end", &g6(v));
    }
    svg.text(16.0, (mt + h - mb) / 2.0, 11.0, "middle", "delta");

    let slot = x.map(1.0) - x.map(0.0);
    let bar_w = slot * 0.32;
    for (g, d) in per_group.iter().enumerate() {
        let base = x.map(g as f64) + slot * 0.18;
        for (i, (value, color)) in [(d[1], "#1f77b4"), (d[2], "#ff7f0e")].iter().enumerate() {
            let yy = y.map(*value);
            let (top, height) = if *value >= 0.0 {
                (yy, zero_y - yy)
            } else {
                (zero_y, yy - zero_y)
            };
            svg.rect(base + i as f64 * bar_w, top, bar_w, height.max(0.0), color, "");
        }
        svg.text(
            x.map(g as f64 + 0.5),
            h - mb + 16.0,
            10.0,
            "middle",
            &g.to_string(),
        );
    }
    svg.text(w / 2.0, h - 18.0, 11.0, "middle", "ablation group");

    // legend
    svg.rect(w - mr - 150.0, mt + 4.0, 10.0, 10.0, "#1f77b4", "");
    svg.text(w - mr - 136.0, mt + 13.0, 10.0, "start", "lateral");
    svg.rect(w - mr - 150.0, mt + 20.0, 10.0, 10.0, "#ff7f0e", "");
    svg.text(w - mr - 136.0, mt + 29.0, 10.0, "start", "rotational");
    svg.finish()
}

/// PCA scatter with cluster colors, trial marker shapes, and raster-filled
/// nearest-centroid regions.
pub fn fig3_pca_scatter(points: &[PcaPoint], centroids: &[CentroidPoint]) -> String {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (60.0, 150.0, 40.0, 50.0);
    let mut svg = SvgCanvas::new(w, h);
    svg.rect(0.0, 0.0, w, h, "#ffffff", "");
    svg.text(w / 2.0 - mr / 2.0 + ml / 2.0, 22.0, 14.0, "middle", "Ablation deltas, first two principal components");

    let (x_lo, x_hi) = value_range(points.iter().map(|p| p.pc[0]).chain(centroids.iter().map(|c| c.pc[0])));
    let (y_lo, y_hi) = value_range(points.iter().map(|p| p.pc[1]).chain(centroids.iter().map(|c| c.pc[1])));
    let xpad = 0.10 * (x_hi - x_lo).max(1e-9);
    let ypad = 0.10 * (y_hi - y_lo).max(1e-9);
    let x = Axis::new(x_lo - xpad, x_hi + xpad, ml, w - mr);
    let y = Axis::new(y_lo - ypad, y_hi + ypad, h - mb, mt);

    // nearest-centroid decision regions on a raster grid in the plane
    let (cells_x, cells_y) = (72usize, 54usize);
    let cell_w = (w - mr - ml) / cells_x as f64;
    let cell_h = (h - mb - mt) / cells_y as f64;
    for iy in 0..cells_y {
        for ix in 0..cells_x {
            let px = ml + (ix as f64 + 0.5) * cell_w;
            let py = mt + (iy as f64 + 0.5) * cell_h;
            let vx = x.lo + (px - x.px0) / (x.px1 - x.px0) * (x.hi - x.lo);
            let vy = y.lo + (py - y.px0) / (y.px1 - y.px0) * (y.hi - y.lo);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in centroids {
                let d = (vx - c.pc[0]).powi(2) + (vy - c.pc[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = c.cluster;
                }
            }
            svg.rect(
                ml + ix as f64 * cell_w,
                mt + iy as f64 * cell_h,
                cell_w + 0.05,
                cell_h + 0.05,
                cluster_color(best),
                &format!(r#"fill-opacity="0.22" class="region cluster-{best}""#),
            );
        }
    }

    // frame and axis labels
    svg.rect(ml, mt, w - mr - ml, h - mb - mt, "none", r##"stroke="#000000" stroke-width="1""##);
    for (v, is_x) in [(x.lo, true), (x.hi, true), (y.lo, false), (y.hi, false)] {
        if is_x {
            svg.text(x.map(v), h - mb + 14.0, 9.0, "middle", &g6(v));
        } else {
            svg.text(ml - 6.0, y.map(v) + 3.0, 9.0, "end", &g6(v));
        }
    }
    svg.text((ml + w - mr) / 2.0, h - 16.0, 11.0, "middle", "pc1");
    svg.text(16.0, (mt + h - mb) / 2.0, 11.0, "middle", "pc2");

    // centroids as crosses under the points
    for c in centroids {
        let (cx, cy) = (x.map(c.pc[0]), y.map(c.pc[1]));
        svg.line(cx - 5.0, cy, cx + 5.0, cy, "#000000", 1.6);
        svg.line(cx, cy - 5.0, cx, cy + 5.0, "#000000", 1.6);
    }

    for p in points {
        trial_marker(
            &mut svg,
            p.trial as usize,
            x.map(p.pc[0]),
            y.map(p.pc[1]),
            4.4,
            cluster_color(p.label),
        );
    }

    // legend: clusters, then trial shapes
    let lx = w - mr + 14.0;
    let mut ly = mt + 6.0;
    svg.text(lx, ly, 11.0, "start", "clusters");
    ly += 8.0;
    let mut clusters: Vec<usize> = centroids.iter().map(|c| c.cluster).collect();
    clusters.sort_unstable();
    for c in clusters {
        svg.rect(lx, ly, 10.0, 10.0, cluster_color(c), "");
        svg.text(lx + 15.0, ly + 9.0, 10.0, "start", &format!("cluster {c}"));
        ly += 16.0;
    }
    ly += 10.0;
    svg.text(lx, ly, 11.0, "start", "trials");
    ly += 10.0;
    let mut trials: Vec<u32> = points.iter().map(|p| p.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    for t in trials {
        trial_marker(&mut svg, t as usize, lx + 5.0, ly + 3.0, 4.4, "#cccccc");
        svg.text(lx + 16.0, ly + 7.0, 10.0, "start", &format!("trial {t}"));
        ly += 16.0;
    }
    svg.finish()
}

/// Mean action change per cluster, three bars per cluster.
pub fn fig4_cluster_means(means: &[ClusterMeans]) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 55.0);
    let mut svg = SvgCanvas::new(w, h);
    svg.rect(0.0, 0.0, w, h, "#ffffff", "");
    svg.text(w / 2.0, 22.0, 14.0, "middle", "Mean output change per cluster");

    let (lo, hi) = value_range(means.iter().flat_map(|m| m.mean).chain([0.0]));
    let pad = 0.08 * (hi - lo).max(1e-9);
    let y = Axis::new(lo - pad, hi + pad, h - mb, mt);
    let x = Axis::new(0.0, means.len() as f64, ml, w - mr);
    svg.line(ml, mt, ml, h - mb, "#000000", 1.0);
    svg.line(ml, h - mb, w - mr, h - mb, "#000000", 1.0);
    let zero_y = y.map(0.0);
    svg.line(ml, zero_y, w - mr, zero_y, "#888888", 0.8);
    for v in [y.lo, 0.0, y.hi] {
        let yy = y.map(v);
        svg.line(ml - 4.0, yy, ml, yy, "#000000", 1.0);
        svg.text(ml - 7.0, yy + 3.5, 10.0, "end", &g6(v));
    }
    svg.text(16.0, (mt + h - mb) / 2.0, 11.0, "middle", "mean delta");

    let colors = ["#2ca02c", "#1f77b4", "#ff7f0e"];
    let labels = ["longitudinal", "lateral", "rotational"];
    let slot = x.map(1.0) - x.map(0.0);
    let bar_w = slot * 0.22;
    for (i, m) in means.iter().enumerate() {
        let base = x.map(i as f64) + slot * 0.14;
        for (c, (value, color)) in m.mean.iter().zip(colors).enumerate() {
            let yy = y.map(*value);
            let (top, height) = if *value >= 0.0 {
                (yy, zero_y - yy)
            } else {
                (zero_y, yy - zero_y)
            };
            svg.rect(base + c as f64 * bar_w, top, bar_w, height.max(0.0), color, "");
        }
        svg.text(
            x.map(i as f64 + 0.5),
            h - mb + 16.0,
            10.0,
            "middle",
            &format!("c{} (n={}, t={})", m.cluster, m.n_members, m.coverage),
        );
    }
    svg.text(w / 2.0, h - 18.0, 11.0, "middle", "cluster (members, trials covered)");
    for (c, label) in labels.iter().enumerate() {
        svg.rect(w - mr - 150.0, mt + 4.0 + c as f64 * 16.0, 10.0, 10.0, colors[c], "");
        svg.text(w - mr - 136.0, mt + 13.0 + c as f64 * 16.0, 10.0, "start", label);
    }
    svg.finish()
}
