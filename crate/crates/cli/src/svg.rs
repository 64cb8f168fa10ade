//! Small SVG charts: histograms and line plots with linear or log axes.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric y half-widths drawn as error bars.
    pub errors: Option<Vec<f64>>,
    pub markers: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, errors: None, markers: false }
    }

    pub fn with_errors(mut self, errors: Vec<f64>) -> Self {
        self.errors = Some(errors);
        self.markers = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Bars {
    pub edges: Vec<f64>,
    pub heights: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub bars: Option<Bars>,
    pub series: Vec<Series>,
}

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn t(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log10 => v.log10(),
        }
    }

    fn px(&self, v: f64) -> f64 {
        let (a, b) = (self.t(self.lo), self.t(self.hi));
        let v = self.t(v).clamp(a.min(b), a.max(b));
        self.px_lo + (v - a) / (b - a) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log10 => {
                let (a, b) = (self.lo.log10().floor() as i32, self.hi.log10().ceil() as i32);
                (a..=b).map(|e| 10f64.powi(e)).filter(|v| *v >= self.lo * (1.0 - 1e-9) && *v <= self.hi * (1.0 + 1e-9)).collect()
            }
            Scale::Linear => {
                let step = nice_step((self.hi - self.lo) / 6.0);
                let first = (self.lo / step).ceil() as i64;
                let last = (self.hi / step).floor() as i64;
                (first..=last).map(|k| k as f64 * step).collect()
            }
        }
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

fn fmt_tick(v: f64, scale: Scale) -> String {
    if scale == Scale::Log10 {
        return format!("1e{}", v.log10().round() as i32);
    }
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>, scale: Scale) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite() && (scale == Scale::Linear || *v > 0.0)) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return None;
    }
    Some(match scale {
        Scale::Log10 => {
            let (a, b) = (lo.log10().floor(), hi.log10().ceil());
            let b = if a == b { b + 1.0 } else { b };
            (10f64.powf(a), 10f64.powf(b))
        }
        Scale::Linear => {
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        }
    })
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            bars: None,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.x_scale = Scale::Log10;
        self.y_scale = Scale::Log10;
        self
    }

    pub fn with_bars(mut self, label: impl Into<String>, edges: Vec<f64>, heights: Vec<f64>) -> Self {
        self.bars = Some(Bars { edges, heights, label: label.into() });
        self
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn axes(&self) -> (Axis, Axis) {
        let mut xs: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for (i, &(_, y)) in s.points.iter().enumerate() {
                let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                ys.extend([y - e, y + e, y]);
            }
        }
        if let Some(b) = &self.bars {
            xs.extend(b.edges.iter().copied());
            ys.extend(b.heights.iter().copied());
            ys.push(0.0);
        }
        let (x_lo, x_hi) = range(xs.into_iter(), self.x_scale).unwrap_or((1.0, 10.0));
        let (mut y_lo, y_hi) = range(ys.into_iter(), self.y_scale).unwrap_or((1.0, 10.0));
        if self.bars.is_some() && self.y_scale == Scale::Linear {
            y_lo = 0.0;
        }
        let x = Axis { scale: self.x_scale, lo: x_lo, hi: x_hi, px_lo: LEFT, px_hi: WIDTH - RIGHT };
        let y = Axis { scale: self.y_scale, lo: y_lo, hi: y_hi, px_lo: HEIGHT - BOTTOM, px_hi: TOP };
        (x, y)
    }

    pub fn render(&self) -> String {
        let (x, y) = self.axes();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(&self.title));

        for t in x.ticks() {
            let px = x.px(t);
            let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, HEIGHT - BOTTOM);
            let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, HEIGHT - BOTTOM + 18.0, fmt_tick(t, x.scale));
        }
        for t in y.ticks() {
            let py = y.px(t);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e5e5e5"/>"##, WIDTH - RIGHT);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, py + 4.0, fmt_tick(t, y.scale));
        }

        let mut legend: Vec<(String, &str, bool)> = Vec::new();
        if let Some(b) = &self.bars {
            for (i, h) in b.heights.iter().enumerate() {
                let (x0, x1) = (x.px(b.edges[i]), x.px(b.edges[i + 1]));
                let (y0, y1) = (y.px(y.lo.max(if y.scale == Scale::Log10 { y.lo } else { 0.0 })), y.px(*h));
                let _ = writeln!(
                    s,
                    r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>"##,
                    y1.min(y0),
                    (x1 - x0).max(0.0),
                    (y0 - y1).abs()
                );
            }
            legend.push((b.label.clone(), "#9ecae1", true));
        }

        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .filter(|(px, py)| {
                    px.is_finite() && py.is_finite() && (x.scale == Scale::Linear || *px > 0.0) && (y.scale == Scale::Linear || *py > 0.0)
                })
                .map(|&(px, py)| format!("{:.2},{:.2}", x.px(px), y.px(py)))
                .collect();
            if path.len() > 1 {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#, path.join(" "));
            }
            for (i, &(px, py)) in series.points.iter().enumerate() {
                if !(px.is_finite() && py.is_finite()) || (y.scale == Scale::Log10 && py <= 0.0) {
                    continue;
                }
                let cx = x.px(px);
                if let Some(err) = &series.errors {
                    let lo = if y.scale == Scale::Log10 && py - err[i] <= 0.0 { y.lo } else { py - err[i] };
                    let (a, b) = (y.px(lo), y.px(py + err[i]));
                    let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{a:.2}" x2="{cx:.2}" y2="{b:.2}" stroke="{color}"/>"#);
                    let _ = writeln!(s, r#"<line x1="{:.2}" y1="{a:.2}" x2="{:.2}" y2="{a:.2}" stroke="{color}"/>"#, cx - 3.0, cx + 3.0);
                    let _ = writeln!(s, r#"<line x1="{:.2}" y1="{b:.2}" x2="{:.2}" y2="{b:.2}" stroke="{color}"/>"#, cx - 3.0, cx + 3.0);
                }
                if series.markers {
                    let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, y.px(py));
                }
            }
            legend.push((series.label.clone(), color, false));
        }

        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 18.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(&self.y_label)
        );
        for (i, (label, color, block)) in legend.iter().enumerate() {
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            if *block {
                let _ = writeln!(s, r#"<rect x="{lx}" y="{:.2}" width="16" height="10" fill="{color}"/>"#, ly - 5.0);
            } else {
                let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 16.0);
            }
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 22.0, ly + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}
