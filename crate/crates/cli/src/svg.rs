//! Minimal line/scatter plots written as SVG path elements.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self { label: label.into(), points, style }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Plot `log10 |y|` instead of `y`.
    pub log_y: bool,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round step for about five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    }
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), ..Default::default() }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn transform(&self, y: f64) -> f64 {
        if self.log_y {
            y.abs().max(1e-300).log10()
        } else {
            y
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                let y = self.transform(y);
                if x.is_finite() && y.is_finite() {
                    b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
                }
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            if hi - lo > 1e-300 * (1.0 + lo.abs()) {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            } else {
                let m = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
                (lo - m, hi + m)
            }
        };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, esc(&self.title)).unwrap();
        writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();

        let xs = tick_step(x1 - x0);
        let mut t = (x0 / xs).ceil() * xs;
        while t <= x1 {
            let x = sx(t);
            writeln!(s, r##"<path d="M{x:.2},{:.2}V{:.2}" stroke="#ddd"/>"##, TOP, TOP + ph).unwrap();
            writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 15.0, fmt_tick(t, xs)).unwrap();
            t += xs;
        }
        let ys = tick_step(y1 - y0);
        let mut t = (y0 / ys).ceil() * ys;
        while t <= y1 {
            let y = sy(t);
            writeln!(s, r##"<path d="M{LEFT},{y:.2}H{:.2}" stroke="#ddd"/>"##, LEFT + pw).unwrap();
            let label = if self.log_y { format!("1e{}", fmt_tick(t, ys)) } else { fmt_tick(t, ys) };
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 5.0, y + 4.0).unwrap();
            t += ys;
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, esc(&self.x_label)).unwrap();
        writeln!(
            s,
            r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            esc(&self.y_label)
        )
        .unwrap();

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = series
                .points
                .iter()
                .map(|&(x, y)| (x, self.transform(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            match series.style {
                Style::Line | Style::Dashed => {
                    let mut d = String::new();
                    for (j, (x, y)) in pts.iter().enumerate() {
                        write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { "L" }, sx(*x), sy(*y)).unwrap();
                    }
                    let dash = if series.style == Style::Dashed { r#" stroke-dasharray="5,3""# } else { "" };
                    writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#).unwrap();
                }
                Style::Markers => {
                    for (x, y) in &pts {
                        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y)).unwrap();
                    }
                }
            }
            let ly = TOP + 12.0 + 16.0 * i as f64;
            let lx = LEFT + pw + 10.0;
            writeln!(s, r#"<path d="M{lx},{ly}h18" stroke="{color}" stroke-width="2"/>"#).unwrap();
            writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 22.0, ly + 4.0, esc(&series.label)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(t: f64, step: f64) -> String {
    let t = if t.abs() < step * 1e-9 { 0.0 } else { t };
    if step >= 1.0 && t.abs() < 1e6 {
        format!("{t:.0}")
    } else if step >= 1e-4 && t.abs() < 1e6 {
        let digits = (-step.log10().floor()) as usize;
        format!("{t:.digits$}")
    } else {
        format!("{t:.1e}")
    }
}
