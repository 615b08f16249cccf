//! Minimal SVG string builder. Output is fully deterministic: fixed
//! coordinate precision, no timestamps, no external resources.

use std::fmt::Write as _;

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct SvgCanvas {
    width: f64,
    height: f64,
    body: String,
}

impl SvgCanvas {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"{}{}/>"#,
            fmt_coord(x),
            fmt_coord(y),
            fmt_coord(w),
            fmt_coord(h),
            fill,
            if extra.is_empty() { "" } else { " " },
            extra
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}"/>"#,
            fmt_coord(x1),
            fmt_coord(y1),
            fmt_coord(x2),
            fmt_coord(y2),
            stroke,
            fmt_coord(width)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}"{}{}/>"#,
            fmt_coord(cx),
            fmt_coord(cy),
            fmt_coord(r),
            fill,
            if extra.is_empty() { "" } else { " " },
            extra
        );
    }

    pub fn polygon(&mut self, points: &[(f64, f64)], fill: &str, extra: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{},{}", fmt_coord(*x), fmt_coord(*y)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{}"{}{}/>"#,
            pts.join(" "),
            fill,
            if extra.is_empty() { "" } else { " " },
            extra
        );
    }

    /// `anchor` is one of `start`, `middle`, `end`.
    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="{}">{}</text>"#,
            fmt_coord(x),
            fmt_coord(y),
            fmt_coord(size),
            anchor,
            escape(content)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
            fmt_coord(self.width),
            fmt_coord(self.height),
            fmt_coord(self.width),
            fmt_coord(self.height),
            self.body
        )
    }
}

/// Fixed cluster palette; cycled when a report somehow exceeds it.
pub const CLUSTER_COLORS: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

pub fn cluster_color(cluster: usize) -> &'static str {
    CLUSTER_COLORS[cluster % CLUSTER_COLORS.len()]
}

/// One marker per trial, drawn centered on `(x, y)` and tagged
/// `class="marker trial-<id>"`. Shapes cycle after eight trials.
pub fn trial_marker(svg: &mut SvgCanvas, trial: usize, x: f64, y: f64, r: f64, fill: &str) {
    let class = format!(r##"class="marker trial-{trial}" stroke="#333333" stroke-width="0.8""##);
    match trial % 8 {
        0 => svg.circle(x, y, r, fill, &class),
        1 => svg.rect(x - r, y - r, 2.0 * r, 2.0 * r, fill, &class),
        2 => svg.polygon(&[(x, y - r * 1.2), (x - r * 1.1, y + r), (x + r * 1.1, y + r)], fill, &class),
        3 => svg.polygon(&[(x, y - r * 1.3), (x + r * 1.3, y), (x, y + r * 1.3), (x - r * 1.3, y)], fill, &class),
        4 => svg.polygon(&[(x, y + r * 1.2), (x - r * 1.1, y - r), (x + r * 1.1, y - r)], fill, &class),
        5 => {
            // plus sign
            let t = r * 0.45;
            svg.polygon(
                &[
                    (x - t, y - r), (x + t, y - r), (x + t, y - t), (x + r, y - t),
                    (x + r, y + t), (x + t, y + t), (x + t, y + r), (x - t, y + r),
                    (x - t, y + t), (x - r, y + t), (x - r, y - t), (x - t, y - t),
                ],
                fill,
                &class,
            );
        }
        6 => {
            // hexagon
            let s = r * 1.15;
            let h = s * 0.866;
            svg.polygon(
                &[(x - s / 2.0, y - h), (x + s / 2.0, y - h), (x + s, y), (x + s / 2.0, y + h), (x - s / 2.0, y + h), (x - s, y)],
                fill,
                &class,
            );
        }
        _ => {
            // five-point star
            let mut pts = Vec::new();
            for i in 0..10 {
                let rad = if i % 2 == 0 { r * 1.4 } else { r * 0.6 };
                let ang = std::f64::consts::PI * (i as f64 / 5.0) - std::f64::consts::FRAC_PI_2;
                pts.push((x + rad * ang.cos(), y + rad * ang.sin()));
            }
            svg.polygon(&pts, fill, &class);
        }
    }
}
