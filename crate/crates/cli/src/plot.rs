//! Minimal SVG line, scatter and bar plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 58.0;
const NOTE_LINE: f64 = 16.0;
const PALETTE: [&str; 4] = ["#1f5fa8", "#c0392b", "#2e8b57", "#7d3c98"];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
    pub dashed: bool,
}

impl Series {
    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            markers: true,
            dashed: false,
        }
    }

    pub fn dashed(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            markers: false,
            dashed: true,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    pub series: Vec<Series>,
    /// Histogram bars as (left edge, right edge, height).
    pub bars: Vec<(f64, f64, f64)>,
    pub notes: Vec<String>,
    /// CSV text embedded verbatim as metadata.
    pub data: String,
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Axis {
    fn build(values: impl Iterator<Item = f64>, log: bool, pixel_lo: f64, pixel_hi: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            log,
            lo: lo - pad,
            hi: hi + pad,
            pixel_lo,
            pixel_hi,
        }
    }

    fn map(&self, v: f64) -> Option<f64> {
        let u = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        u.is_finite()
            .then(|| self.pixel_lo + (u - self.lo) / (self.hi - self.lo) * (self.pixel_hi - self.pixel_lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let decades = self.hi - self.lo;
            let (base, step): (f64, f64) = if decades >= 2.0 { (10.0, 1.0) } else { (2.0, 1.0) };
            let to_base = |u: f64| u / base.log10();
            let (a, b) = (to_base(self.lo).ceil() as i32, to_base(self.hi).floor() as i32);
            let stride = (((b - a) as f64 / 8.0).ceil() as i32).max(step as i32);
            (a..=b)
                .filter(|k| k.rem_euclid(stride) == 0)
                .map(|k| {
                    let label = if base == 10.0 { format!("1e{k}") } else { format!("2^{k}") };
                    (base.powi(k), label)
                })
                .collect()
        } else {
            let span = self.hi - self.lo;
            let raw = span / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
            let mut t = (self.lo / step).ceil() * step;
            let mut out = Vec::new();
            while t <= self.hi + 1e-9 * step {
                let v = if t.abs() < 1e-12 * step { 0.0 } else { t };
                out.push((v, format!("{}", (v * 1e9).round() / 1e9)));
                t += step;
            }
            out
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.bars.iter().flat_map(|b| [b.0, b.1]));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.bars.iter().flat_map(|b| [0.0, b.2]));
        let xa = Axis::build(xs, self.x_log, LEFT, WIDTH - RIGHT);
        let ya = Axis::build(ys, self.y_log, HEIGHT - BOTTOM, TOP);

        let total = HEIGHT + NOTE_LINE * self.notes.len() as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total}" viewBox="0 0 {WIDTH} {total}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<metadata><![CDATA[\n{}]]></metadata>", self.data.replace("]]>", "]]]]><![CDATA[>"));
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{total}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
        for (v, label) in xa.ticks() {
            if let Some(px) = xa.map(v) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{y1}" stroke="#e4e4e4"/><text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"##,
                    y0 + 16.0
                );
            }
        }
        for (v, label) in ya.ticks() {
            if let Some(py) = ya.map(v) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#e4e4e4"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
                    x0 - 6.0,
                    py + 4.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
        for &(a, b, h) in &self.bars {
            if let (Some(pa), Some(pb), Some(ph), Some(pz)) = (xa.map(a), xa.map(b), ya.map(h), ya.map(0.0)) {
                let _ = writeln!(
                    s,
                    r##"<rect x="{pa:.2}" y="{ph:.2}" width="{:.2}" height="{:.2}" fill="#9ab8dc" stroke="#1f5fa8" stroke-width="0.5"/>"##,
                    (pb - pa).max(0.0),
                    (pz - ph).max(0.0)
                );
            }
        }
        for (i, series) in self.series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter_map(|&(x, y)| Some((xa.map(x)?, ya.map(y)?)))
                .collect();
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            if pts.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>"#,
                    path.join(" ")
                );
            }
            if series.markers {
                for (x, y) in &pts {
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{colour}"/>"#);
                }
            }
        }
        if !self.series.is_empty() {
            let longest = self.series.iter().map(|r| r.label.chars().count()).max().unwrap_or(0);
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="white" fill-opacity="0.85" stroke="#bbbbbb"/>"##,
                x0 + 4.0,
                y1 + 4.0,
                40.0 + 7.0 * longest as f64,
                8.0 + 16.0 * self.series.len() as f64
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let ly = y1 + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                x0 + 10.0,
                x0 + 30.0,
                x0 + 36.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        for (i, note) in self.notes.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{x0}" y="{}">{}</text>"#,
                HEIGHT - 2.0 + NOTE_LINE * i as f64,
                escape(note)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
