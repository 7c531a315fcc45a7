//! Minimal hand-written SVG charts: line overlays, stacked bars and
//! histograms. Coordinates are printed with fixed precision so output is
//! byte-stable.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Frame {
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Frame { x: pad(x), y: pad(y) }
    }
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (f.px(f.x.0), f.px(f.x.1), f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    for k in 0..=4 {
        let xv = f.x.0 + (f.x.1 - f.x.0) * k as f64 / 4.0;
        let yv = f.y.0 + (f.y.1 - f.y.0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#, f.px(xv), y0 + 16.0, xv);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#, x0 - 4.0, f.py(yv) + 4.0, yv);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn legend(s: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = TOP + 14.0 * i as f64 + 6.0;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{c}"/>"#, W - 170.0, y);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, W - 155.0, y + 9.0, escape(l));
    }
}

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Line plot of several series with optional vertical reference lines.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], vlines: &[f64]) -> String {
    let finite = |v: &&f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.x.iter()).filter(finite);
    let ys = series.iter().flat_map(|s| s.y.iter()).filter(finite);
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let ymax = ys.fold(0.0f64, |a, &v| a.max(v));
    let f = Frame::new((xmin.min(0.0), xmax.max(1.0)), (0.0, ymax * 1.05));
    let mut s = open(title);
    axes(&mut s, &f, xlabel, ylabel);
    for &v in vlines {
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            f.py(f.y.0),
            f.py(f.y.1),
            x = f.px(v)
        );
    }
    for (i, se) in series.iter().enumerate() {
        let pts: Vec<String> = se
            .x
            .iter()
            .zip(se.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    legend(&mut s, &series.iter().map(|x| x.label).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// One bar per category, split into stacked segments (bottom first).
pub fn stacked_bars(title: &str, ylabel: &str, categories: &[String], segment_labels: &[&str], values: &[Vec<f64>]) -> String {
    let ymax = values
        .iter()
        .map(|v| v.iter().filter(|x| x.is_finite()).map(|x| x.max(0.0)).sum::<f64>())
        .fold(0.0f64, f64::max);
    let f = Frame::new((0.0, categories.len().max(1) as f64), (0.0, ymax.max(1e-9) * 1.05));
    let mut s = open(title);
    axes(&mut s, &f, "", ylabel);
    let slot = (f.px(1.0) - f.px(0.0)).abs();
    for (i, (cat, segs)) in categories.iter().zip(values).enumerate() {
        let mut base = 0.0;
        for (k, &v) in segs.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            // negative segments are drawn downwards from the running top
            let (lo, hi) = if v >= 0.0 { (base, base + v) } else { (base + v, base) };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                f.px(i as f64) + slot * 0.2,
                f.py(hi),
                slot * 0.6,
                (f.py(lo) - f.py(hi)).abs(),
                PALETTE[k % PALETTE.len()]
            );
            base += v;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(i as f64 + 0.5),
            f.py(0.0) + 30.0,
            escape(cat)
        );
    }
    legend(&mut s, segment_labels);
    s.push_str("</svg>\n");
    s
}

/// Histogram of `values` with `bins` equal bins on [lo, hi].
pub fn histogram(title: &str, xlabel: &str, values: &[f64], lo: f64, hi: f64, bins: usize) -> String {
    let mut counts = vec![0usize; bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let k = (((v - lo) / (hi - lo)) * bins as f64).floor();
        let k = (k.max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let ymax = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame::new((lo, hi), (0.0, ymax * 1.05));
    let mut s = open(title);
    axes(&mut s, &f, xlabel, "count");
    let width = (hi - lo) / bins as f64;
    for (k, &c) in counts.iter().enumerate() {
        let x0 = lo + width * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="white"/>"#,
            f.px(x0),
            f.py(c as f64),
            f.px(x0 + width) - f.px(x0),
            f.py(0.0) - f.py(c as f64),
            PALETTE[0]
        );
    }
    s.push_str("</svg>\n");
    s
}
