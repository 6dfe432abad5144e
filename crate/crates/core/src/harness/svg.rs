//! Minimal SVG charts for inspecting reports. The CSV files carry the data.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn head(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let y = 34.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{}</text>",
            W - 150.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            W - 136.0,
            y,
            escape(n)
        );
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Self { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn axes(s: &mut String, xs: &Scale, ys: &Scale, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        "<line x1=\"{PAD}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/><line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{y0}\" stroke=\"black\"/>",
        y0 = H - PAD,
        x1 = W - PAD
    );
    for k in 0..=4 {
        let v = ys.lo + (ys.hi - ys.lo) * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>", PAD - 4.0, ys.map(v) + 4.0, v);
        let v = xs.lo + (xs.hi - xs.lo) * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>", xs.map(v), H - PAD + 16.0, v);
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

/// Grouped bars: one group per category, one bar per series. Non-finite
/// values are left blank.
pub fn bar_chart(title: &str, categories: &[String], series: &[(&str, Vec<f64>)], ylabel: &str) -> String {
    let mut s = head(title);
    let (lo, hi) = bounds(series.iter().flat_map(|(_, v)| v.iter().copied()).chain([0.0]));
    let ys = Scale::new(lo.min(0.0), hi.max(0.0), H - PAD, PAD);
    let xs = Scale::new(0.0, categories.len().max(1) as f64, PAD, W - PAD);
    axes(&mut s, &Scale::new(0.0, 1.0, PAD, W - PAD), &ys, "", ylabel);
    let group = (xs.map(1.0) - xs.map(0.0)) * 0.8;
    let bar = group / series.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        let x0 = xs.map(c as f64) + group * 0.125;
        for (k, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (y, z) = (ys.map(v), ys.map(0.0));
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
                x0 + bar * k as f64,
                y.min(z),
                bar,
                (z - y).abs(),
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"end\" transform=\"rotate(-45 {:.1} {})\">{}</text>",
            x0 + group / 2.0,
            H - PAD + 28.0,
            x0 + group / 2.0,
            H - PAD + 28.0,
            escape(name)
        );
    }
    legend(&mut s, &series.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Line chart sharing one x grid; non-finite points break the line.
pub fn line_chart(title: &str, x: &[f64], series: &[(&str, Vec<f64>)], xlabel: &str, ylabel: &str) -> String {
    let mut s = head(title);
    let (xl, xh) = bounds(x.iter().copied());
    let (yl, yh) = bounds(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let (xs, ys) = (Scale::new(xl, xh, PAD, W - PAD), Scale::new(yl.min(yh), yh.max(yl), H - PAD, PAD));
    if xl.is_finite() && yl.is_finite() {
        axes(&mut s, &xs, &ys, xlabel, ylabel);
    }
    for (k, (_, vals)) in series.iter().enumerate() {
        let mut path = String::new();
        let mut pen_down = false;
        for (xv, yv) in x.iter().zip(vals) {
            if !yv.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(path, "{}{:.1},{:.1} ", if pen_down { "L" } else { "M" }, xs.map(*xv), ys.map(*yv));
            pen_down = true;
        }
        let _ = writeln!(s, "<path d=\"{path}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>", PALETTE[k % PALETTE.len()]);
    }
    legend(&mut s, &series.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Scatter plot coloured by class, with optional point labels.
pub fn scatter(title: &str, points: &[(f64, f64, &str, &str)], xlabel: &str, ylabel: &str) -> String {
    let mut s = head(title);
    let (xl, xh) = bounds(points.iter().map(|p| p.0));
    let (yl, yh) = bounds(points.iter().map(|p| p.1));
    let mut classes: Vec<&str> = points.iter().map(|p| p.2).collect();
    classes.sort_unstable();
    classes.dedup();
    if !points.is_empty() {
        let (xs, ys) = (Scale::new(xl, xh, PAD, W - PAD), Scale::new(yl, yh, H - PAD, PAD));
        axes(&mut s, &xs, &ys, xlabel, ylabel);
        for (x, y, class, label) in points {
            let c = PALETTE[classes.iter().position(|k| k == class).unwrap_or(0) % PALETTE.len()];
            let (px, py) = (xs.map(*x), ys.map(*y));
            let _ = writeln!(s, "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"3\" fill=\"{c}\"/>");
            if !label.is_empty() {
                let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\">{}</text>", px + 4.0, py - 3.0, escape(label));
            }
        }
    }
    legend(&mut s, &classes);
    s.push_str("</svg>\n");
    s
}
