//! Minimal SVG line plots.

use std::fmt::Write;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub width: f64,
    pub dashed: bool,
    pub color: Option<&'static str>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            width: 1.5,
            dashed: false,
            color: None,
        }
    }

    pub fn width(mut self, w: f64) -> Self {
        self.width = w;
        self
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn color(mut self, c: &'static str) -> Self {
        self.color = Some(c);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed ranges; derived from the data when `None`.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl Panel {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    (lo <= hi).then_some((lo, hi))
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi - lo > 1e-12 * hi.abs().max(1.0) {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// About five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn draw_panel(out: &mut String, p: &Panel, ox: f64, oy: f64) {
    let all = || p.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = p
        .x_range
        .unwrap_or_else(|| padded(finite_range(all().map(|q| q.0)).unwrap_or((0.0, 1.0))));
    let (y0, y1) = p.y_range.unwrap_or_else(|| {
        let (lo, hi) = padded(finite_range(all().map(|q| q.1)).unwrap_or((0.0, 1.0)));
        // Non-negative data keeps zero on the axis; leave headroom above.
        let lo = if lo >= 0.0 { 0.0 } else { lo };
        (lo, hi + 0.05 * (hi - lo))
    });
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| oy + MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * h;

    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#000"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + MARGIN_L + w / 2.0,
        oy + 18.0,
        escape(&p.title)
    );
    for t in ticks(x0, x1) {
        let x = px(t);
        let yb = oy + MARGIN_T + h;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="#000"/>"##,
            yb + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            yb + 15.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        let xl = ox + MARGIN_L;
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{xl:.1}" y2="{y:.1}" stroke="#000"/>"##,
            xl - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            xl - 6.0,
            y + 3.5,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        ox + MARGIN_L + w / 2.0,
        oy + PANEL_H - 8.0,
        escape(&p.x_label)
    );
    let (lx, ly) = (ox + 14.0, oy + MARGIN_T + h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        escape(&p.y_label)
    );

    let _ = writeln!(
        out,
        r#"<clipPath id="c{}_{}"><rect x="{:.1}" y="{:.1}" width="{w:.1}" height="{h:.1}"/></clipPath>"#,
        ox as i64,
        oy as i64,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    for (i, s) in p.series.iter().enumerate() {
        let color = s.color.unwrap_or(PALETTE[i % PALETTE.len()]);
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                px(x),
                py(y)
            );
            pen_down = true;
        }
        if !d.is_empty() {
            let dash = if s.dashed {
                r#" stroke-dasharray="5,3""#
            } else {
                ""
            };
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="{}"{dash} clip-path="url(#c{}_{})"/>"#,
                d.trim_end(),
                s.width,
                ox as i64,
                oy as i64
            );
        }
        if !s.label.is_empty() {
            let ly = oy + MARGIN_T + 12.0 + 13.0 * i as f64;
            let lx = ox + PANEL_W - MARGIN_R - 120.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="{}"/>"#,
                ly - 3.5,
                lx + 16.0,
                ly - 3.5,
                s.width
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{ly:.1}" font-size="10">{}</text>"#,
                lx + 20.0,
                escape(&s.label)
            );
        }
    }
}

/// Panels laid out row-major in `cols` columns.
pub fn figure(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols).max(1);
    let (width, height) = (PANEL_W * cols as f64, PANEL_H * rows as f64);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n"
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    for (k, p) in panels.iter().enumerate() {
        draw_panel(
            &mut out,
            p,
            PANEL_W * (k % cols) as f64,
            PANEL_H * (k / cols) as f64,
        );
    }
    out.push_str("</svg>\n");
    out
}

/// `(t, |E(t)| / scale)` for plotting a pulse envelope.
pub fn envelope(p: &eitmem_core::SampledPulse, scale: f64) -> Vec<(f64, f64)> {
    let s = if scale > 0.0 { scale } else { 1.0 };
    p.times()
        .zip(p.samples())
        .map(|(t, v)| (t, v.norm() / s))
        .collect()
}
