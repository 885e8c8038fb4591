//! Standalone SVG charts: scatter plots of point clouds and line charts.
//! Fixed 800x600 viewport, axes with tick labels, a legend when there is
//! more than one series. Scatter points are the only `<circle>` elements.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Axis { lo, hi, log }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    /// Tick positions in data units with their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo as i32, self.hi as i32);
            let stride = ((b - a) / 8).max(1);
            return (a..=b)
                .step_by(stride as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect();
        }
        let step = nice_step((self.hi - self.lo) / 6.0);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|k| {
                let v = k as f64 * step;
                (v, tick_label(v, step))
            })
            .collect()
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with("-0") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct Frame {
    x: Axis,
    y: Axis,
}

impl Frame {
    fn px(&self, x: f64) -> Option<f64> {
        self.x.unit(x).map(|u| LEFT + u * (WIDTH - LEFT - RIGHT))
    }

    fn py(&self, y: f64) -> Option<f64> {
        self.y
            .unit(y)
            .map(|u| HEIGHT - BOTTOM - u * (HEIGHT - TOP - BOTTOM))
    }

    fn draw_axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            x1 - x0,
            y0 - y1
        );
        for (v, label) in self.x.ticks() {
            if let Some(px) = self.px(v) {
                let _ = writeln!(
                    out,
                    r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"##,
                    y0 + 5.0,
                    y0 + 20.0,
                    escape(&label)
                );
            }
        }
        for (v, label) in self.y.ticks() {
            if let Some(py) = self.py(v) {
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"##,
                    x0 - 5.0,
                    x0 - 8.0,
                    py + 4.0,
                    escape(&label)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 15.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }

    fn draw_legend(&self, out: &mut String, labels: &[&str]) {
        if labels.len() < 2 {
            return;
        }
        for (i, label) in labels.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = WIDTH - RIGHT - 150.0;
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}"/><text x="{}" y="{}" font-size="12">{}</text>"#,
                PALETTE[i % PALETTE.len()],
                x + 18.0,
                y + 10.0,
                escape(label)
            );
        }
    }
}

fn open_svg() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One circle per point; each cloud gets its own colour.
pub fn scatter_svg(title: &str, clouds: &[Series]) -> String {
    let all = || clouds.iter().flat_map(|c| c.points.iter());
    let frame = Frame {
        x: Axis::fit(all().map(|p| p.0), false),
        y: Axis::fit(all().map(|p| p.1), false),
    };
    let mut out = open_svg();
    frame.draw_axes(&mut out, title, "x1", "x2");
    for (i, cloud) in clouds.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<g fill="{color}" fill-opacity="0.5">"#);
        for &(x, y) in &cloud.points {
            if let (Some(px), Some(py)) = (frame.px(x), frame.py(y)) {
                let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="1.5"/>"#);
            }
        }
        out.push_str("</g>\n");
    }
    let labels: Vec<&str> = clouds.iter().map(|c| c.label.as_str()).collect();
    frame.draw_legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Polyline per series; non-finite (or, on a log axis, non-positive) values
/// break the line.
pub fn line_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let frame = Frame {
        x: Axis::fit(all().map(|p| p.0), false),
        y: Axis::fit(all().map(|p| p.1), log_y),
    };
    let mut out = open_svg();
    frame.draw_axes(&mut out, title, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    seg.join(" ")
                );
            }
            seg.clear();
        };
        for &(x, y) in &s.points {
            match (frame.px(x), frame.py(y)) {
                (Some(px), Some(py)) => segment.push(format!("{px:.2},{py:.2}")),
                _ => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
    frame.draw_legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
