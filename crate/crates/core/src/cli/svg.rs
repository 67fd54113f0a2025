//! Text SVG renders: log-scale line plots and g² heatmaps.

use std::fmt::Write;

use super::output::banner;
use crate::spectra::SpectrumResult;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

pub const INVALID_COLOR: [u8; 3] = [128, 128, 128];
pub const NEUTRAL_COLOR: [u8; 3] = [255, 255, 255];
const BLUE: [u8; 3] = [33, 102, 172];
const RED: [u8; 3] = [178, 24, 43];
const SERIES_COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Mapping from g² to a diverging color, white at g² = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorScale {
    /// Linear on both sides; full blue at 0, full red at `clamp` and above.
    Linear { clamp: f64 },
    /// `log10 g²` mapped linearly; full saturation at ±`decades`.
    SymLog { decades: f64 },
}

impl Default for ColorScale {
    fn default() -> Self {
        ColorScale::Linear { clamp: 2.0 }
    }
}

impl ColorScale {
    /// Signed position in [−1, 1]; negative is antibunched.
    fn position(self, g2: f64) -> f64 {
        let t = match self {
            ColorScale::Linear { clamp } if g2 >= 1.0 => (g2 - 1.0) / (clamp - 1.0),
            ColorScale::Linear { .. } => g2 - 1.0,
            ColorScale::SymLog { decades } => g2.log10() / decades,
        };
        t.clamp(-1.0, 1.0)
    }

    fn at_position(self, t: f64) -> f64 {
        match self {
            ColorScale::Linear { clamp } if t >= 0.0 => 1.0 + t * (clamp - 1.0),
            ColorScale::Linear { .. } => 1.0 + t,
            ColorScale::SymLog { decades } => 10f64.powf(t * decades),
        }
    }

    /// Symmetric-log scale spanning every valid value in `results`.
    pub fn symlog_covering(results: &[&SpectrumResult]) -> Self {
        let decades = results
            .iter()
            .flat_map(|r| r.g2.iter().flatten())
            .filter(|g| **g > 0.0 && g.is_finite())
            .fold(0.1f64, |m, g| m.max(g.log10().abs()));
        ColorScale::SymLog { decades }
    }
}

fn blend(to: [u8; 3], t: f64) -> [u8; 3] {
    let mut out = [0u8; 3];
    for k in 0..3 {
        let w = f64::from(NEUTRAL_COLOR[k]);
        out[k] = (w + t * (f64::from(to[k]) - w)).round() as u8;
    }
    out
}

/// Cell color; `None` and non-finite values are gray.
pub fn g2_color(g2: Option<f64>, scale: ColorScale) -> [u8; 3] {
    match g2 {
        Some(g) if g.is_finite() && g >= 0.0 => {
            let t = scale.position(g);
            if t >= 0.0 {
                blend(RED, t)
            } else {
                blend(BLUE, -t)
            }
        }
        _ => INVALID_COLOR,
    }
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= target as f64).unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + 1e-9 * span {
        ticks.push(if (k * step).abs() < 1e-12 * span { 0.0 } else { k * step });
        k += 1.0;
    }
    ticks
}

fn open(svg: &mut String, title: &str, result: &SpectrumResult) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, "<metadata>{}</metadata>", escape(&banner(&result.provenance)));
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="28" text-anchor="middle" font-size="15">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title));
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn x_axis(svg: &mut String, f: &Frame, title: &str) {
    let base = HEIGHT - BOTTOM;
    for t in nice_ticks(f.x0, f.x1, 8) {
        let x = f.px(t);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{base}" x2="{x:.2}" y2="{}" stroke="black"/>"#, base + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, base + 19.0, label(t));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 15.0, escape(title));
}

fn frame_box(svg: &mut String) {
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
}

/// Log-scale plot of one or more single-photon results sharing an axis.
pub fn line_plot(series: &[(&str, &SpectrumResult)], title: &str) -> String {
    let mut svg = String::new();
    let first = series.first().expect("line plot needs a series").1;
    open(&mut svg, title, first);
    let xs = series.iter().flat_map(|(_, r)| r.grid.axis1.iter().copied());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let positive = || series.iter().flat_map(|(_, r)| r.s1.iter().flatten().copied()).filter(|v| *v > 0.0 && v.is_finite());
    let top = positive().fold(f64::MIN_POSITIVE, f64::max);
    let bottom = positive().fold(top, f64::min).max(top * 1e-12);
    let (y0, y1) = (bottom.log10().floor(), top.log10().ceil().max(bottom.log10().floor() + 1.0));
    let f = Frame { x0, x1: if x1 > x0 { x1 } else { x0 + 1.0 }, y0, y1 };

    for d in (y0 as i32)..=(y1 as i32) {
        let y = f.py(f64::from(d));
        let _ = writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, WIDTH - RIGHT);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
    }
    for (k, (name, r)) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (x, v) in r.grid.axis1.iter().zip(&r.s1) {
            match v {
                Some(v) if *v > 0.0 && v.is_finite() => {
                    let y = f.py(v.log10().max(y0));
                    let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, f.px(*x), y);
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#, path.trim_end());
        let ly = TOP + 20.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 25.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(name));
    }
    frame_box(&mut svg);
    x_axis(&mut svg, &f, "detuning ω − ω_L (ps⁻¹)");
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">S(ω)</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Cell boundaries for possibly non-uniform axis points.
fn edges(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![axis[0] - 0.5, axis[0] + 0.5];
    }
    let mut e = Vec::with_capacity(n + 1);
    e.push(axis[0] - 0.5 * (axis[1] - axis[0]));
    for k in 1..n {
        e.push(0.5 * (axis[k - 1] + axis[k]));
    }
    e.push(axis[n - 1] + 0.5 * (axis[n - 1] - axis[n - 2]));
    e
}

/// g² heatmap: ω₁ horizontal, ω₂ vertical.
pub fn heatmap(result: &SpectrumResult, scale: ColorScale, title: &str) -> String {
    let mut svg = String::new();
    open(&mut svg, title, result);
    let axis1 = &result.grid.axis1;
    let axis2 = result.grid.axis2.as_deref().unwrap_or(&result.grid.axis1);
    let (e1, e2) = (edges(axis1), edges(axis2));
    let f = Frame { x0: e1[0], x1: e1[e1.len() - 1], y0: e2[0], y1: e2[e2.len() - 1] };
    let n2 = axis2.len();
    let _ = writeln!(svg, r#"<g shape-rendering="crispEdges">"#);
    for j in 0..n2 {
        let (ya, yb) = (f.py(e2[j + 1]), f.py(e2[j]));
        let mut i = 0;
        while i < axis1.len() {
            let color = g2_color(result.g2.get(i * n2 + j).copied().flatten(), scale);
            let mut k = i + 1;
            while k < axis1.len() && g2_color(result.g2.get(k * n2 + j).copied().flatten(), scale) == color {
                k += 1;
            }
            let (xa, xb) = (f.px(e1[i]), f.px(e1[k]));
            let _ = writeln!(
                svg,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                xb - xa,
                yb - ya,
                hex(color)
            );
            i = k;
        }
    }
    svg.push_str("</g>\n");
    frame_box(&mut svg);
    x_axis(&mut svg, &f, "ω₁ − ω_L (ps⁻¹)");
    for t in nice_ticks(f.y0, f.y1, 8) {
        let y = f.py(t);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(t));
    }
    let mid = (TOP + HEIGHT - BOTTOM) / 2.0;
    let _ = writeln!(svg, r#"<text x="20" y="{mid}" text-anchor="middle" transform="rotate(-90 20 {mid})">ω₂ − ω_L (ps⁻¹)</text>"#);
    colorbar(&mut svg, scale);
    svg.push_str("</svg>\n");
    svg
}

fn colorbar(svg: &mut String, scale: ColorScale) {
    let (x, w) = (WIDTH - RIGHT + 30.0, 22.0);
    let (top, bottom) = (TOP, HEIGHT - BOTTOM);
    let steps = 100;
    let h = (bottom - top) / steps as f64;
    for s in 0..steps {
        let t = 1.0 - 2.0 * (s as f64 + 0.5) / steps as f64;
        let c = g2_color(Some(scale.at_position(t)), scale);
        let _ = writeln!(svg, r#"<rect x="{x}" y="{:.2}" width="{w}" height="{:.2}" fill="{}"/>"#, top + h * s as f64, h + 0.3, hex(c));
    }
    let _ = writeln!(svg, r#"<rect x="{x}" y="{top}" width="{w}" height="{}" fill="none" stroke="black"/>"#, bottom - top);
    for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let y = top + (1.0 - t) / 2.0 * (bottom - top);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}">{}</text>"#, x + w + 5.0, y + 4.0, label(scale.at_position(t)));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">g²</text>"#, x + w / 2.0, top - 8.0);
}
