//! Self-contained SVG charts: histograms with a Gaussian overlay and
//! point series with an optional reference line.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

/// One histogram bar in data units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub left: f64,
    pub right: f64,
    /// Bar height, normally a density.
    pub height: f64,
}

/// Normal density drawn over a histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    fn density(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.sd;
        (-0.5 * u * u).exp() / (self.sd * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// A point series with optional error bars and reference line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub yerr: Option<Vec<f64>>,
    pub line: Option<Vec<f64>>,
    pub x_label: String,
    pub y_label: String,
}

/// Maps data coordinates onto the plotting area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(mut x0: f64, mut x1: f64, mut y0: f64, mut y1: f64) -> Self {
        if !(x1 > x0) {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if !(y1 > y0) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (t, b) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(out, r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#);
    for i in 0..=TICKS {
        let u = i as f64 / TICKS as f64;
        let xv = f.x0 + u * (f.x1 - f.x0);
        let yv = f.y0 + u * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, b + 18.0, tick(xv));
        let _ = writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 8.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

/// Histogram bars with an optional normal density curve.
pub fn histogram_svg(bars: &[Bar], overlay: Option<Gaussian>, title: &str, x_label: &str) -> String {
    let x0 = bars.iter().map(|b| b.left).fold(f64::INFINITY, f64::min);
    let x1 = bars.iter().map(|b| b.right).fold(f64::NEG_INFINITY, f64::max);
    let curve: Vec<(f64, f64)> = match overlay {
        Some(g) if g.sd > 0.0 && x1 > x0 => (0..=200)
            .map(|i| {
                let x = x0 + (x1 - x0) * i as f64 / 200.0;
                (x, g.density(x))
            })
            .collect(),
        _ => Vec::new(),
    };
    let ymax = bars
        .iter()
        .map(|b| b.height)
        .chain(curve.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let f = Frame::new(x0, x1, 0.0, ymax * 1.05);
    let mut out = String::new();
    header(&mut out, title);
    for b in bars {
        let (l, r) = (f.px(b.left), f.px(b.right));
        let (top, base) = (f.py(b.height.max(0.0)), f.py(0.0));
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
            (r - l).max(1.0),
            base - top
        );
    }
    if !curve.is_empty() {
        let _ = writeln!(out, r#"<polyline fill="none" stroke="black" stroke-width="2" points="{}"/>"#, points(&f, &curve));
    }
    axes(&mut out, &f, x_label, "density");
    out.push_str("</svg>\n");
    out
}

fn points(f: &Frame, pts: &[(f64, f64)]) -> String {
    pts.iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Points with optional error bars and a reference line.
pub fn series_svg(s: &Series, title: &str) -> String {
    let err = |i: usize| s.yerr.as_ref().map_or(0.0, |e| e[i].abs()).max(0.0);
    let mut ys: Vec<f64> = Vec::new();
    for i in 0..s.y.len() {
        ys.push(s.y[i] - err(i));
        ys.push(s.y[i] + err(i));
    }
    if let Some(l) = &s.line {
        ys.extend(l.iter().copied());
    }
    let finite = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let (xs, ys) = (finite(&s.x), finite(&ys));
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1, y0, y1) = (lo(&xs), hi(&xs), lo(&ys), hi(&ys));
    let (xpad, ypad) = (0.05 * (x1 - x0), 0.1 * (y1 - y0));
    let f = Frame::new(x0 - xpad, x1 + xpad, y0 - ypad, y1 + ypad);
    let mut out = String::new();
    header(&mut out, title);
    if let Some(l) = &s.line {
        let pts: Vec<(f64, f64)> = s.x.iter().copied().zip(l.iter().copied()).collect();
        let _ = writeln!(out, r##"<polyline fill="none" stroke="#d62728" stroke-width="2" points="{}"/>"##, points(&f, &pts));
    }
    for i in 0..s.x.len() {
        let (x, y) = (s.x[i], s.y[i]);
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let e = err(i);
        if e > 0.0 {
            let _ = writeln!(
                out,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#,
                f.px(x),
                f.py(y - e),
                f.py(y + e)
            );
        }
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#, f.px(x), f.py(y));
    }
    axes(&mut out, &f, &s.x_label, &s.y_label);
    out.push_str("</svg>\n");
    out
}
