//! Minimal deterministic SVG line plots: an 800x600 canvas split into
//! side-by-side panels, each with min/max tick labels and one polyline per
//! series in data order.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        Self {
            label: label.into(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        }
    }

    /// Same series with both coordinates replaced by absolute values.
    pub fn abs(&self) -> Self {
        Self {
            label: format!("|{}|", self.label),
            points: self.points.iter().map(|&(x, y)| (x.abs(), y.abs())).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log: bool,
}

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return (lo - pad, hi + pad);
    }
    let margin = 0.05 * (hi - lo);
    (lo - margin, hi + margin)
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else {
        format!("{v:.3e}")
    }
}

fn render_panel(out: &mut String, panel: &Panel, x0: f64, width: f64) {
    let map = |v: f64| if panel.log { v.log10() } else { v };
    let usable = |v: f64| v.is_finite() && (!panel.log || v > 0.0);
    let pts: Vec<Vec<(f64, f64)>> = panel
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| usable(*x) && usable(*y))
                .map(|&(x, y)| (map(x), map(y)))
                .collect()
        })
        .collect();
    let (xmin, xmax) = axis_range(pts.iter().flatten().map(|p| p.0));
    let (ymin, ymax) = axis_range(pts.iter().flatten().map(|p| p.1));

    let (left, right) = (x0 + LEFT, x0 + width - RIGHT);
    let (top, bottom) = (TOP, HEIGHT - BOTTOM);
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (right - left);
    let sy = |y: f64| bottom - (y - ymin) / (ymax - ymin) * (bottom - top);

    let _ = writeln!(
        out,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
        right - left,
        bottom - top
    );
    let mid = (left + right) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{left:.2}" y="{:.2}" text-anchor="start">{}</text>"#,
        bottom + 16.0,
        tick(xmin, panel.log)
    );
    let _ = writeln!(
        out,
        r#"<text x="{right:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        bottom + 16.0,
        tick(xmax, panel.log)
    );
    let _ = writeln!(
        out,
        r#"<text x="{mid:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        bottom + 36.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{bottom:.2}" text-anchor="end">{}</text>"#,
        left - 4.0,
        tick(ymin, panel.log)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        left - 4.0,
        top + 10.0,
        tick(ymax, panel.log)
    );
    let _ = writeln!(
        out,
        r#"<text x="{left:.2}" y="{:.2}" text-anchor="start">{}</text>"#,
        top - 8.0,
        escape(&panel.y_label)
    );

    for (k, (series, points)) in panel.series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="{color}">{}</text>"#,
            right - 6.0,
            top + 16.0 + 14.0 * k as f64,
            escape(&series.label)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(title: &str, panels: &[Panel]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let width = WIDTH / panels.len().max(1) as f64;
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut out, panel, i as f64 * width, width);
    }
    out.push_str("</svg>\n");
    out
}

/// Signed panel and absolute-value panel for the same series.
pub fn signed_and_abs(title: &str, x_label: &str, y_label: &str, series: Vec<Series>, log: bool) -> String {
    let abs = series.iter().map(Series::abs).collect();
    render(
        title,
        &[
            Panel {
                x_label: x_label.into(),
                y_label: y_label.into(),
                series,
                log: false,
            },
            Panel {
                x_label: format!("|{x_label}|"),
                y_label: format!("|{y_label}|"),
                series: abs,
                log,
            },
        ],
    )
}
