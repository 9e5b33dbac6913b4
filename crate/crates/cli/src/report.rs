//! CSV and SVG writers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::CliError;

/// Plain decimal notation for moderate magnitudes, scientific otherwise.
/// The output never depends on the locale.
pub fn num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Accumulates `\n`-terminated CSV lines.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self { text: format!("{header}\n") }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            first = false;
            self.text.push_str(f.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Writes the CSV to `out`, or to standard output.
pub fn emit(csv: &Csv, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, csv.as_str()).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(csv.as_str().as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
        }
    }
}

/// One point of the ratio plot: threshold, ratio and its interval.
#[derive(Debug, Clone, Copy)]
pub struct RatioPoint {
    pub u: f64,
    pub ratio: f64,
    pub low: f64,
    pub high: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, include: f64) -> Self {
        let mut lo = include;
        let mut hi = include;
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if log {
            lo = lo.log10().floor();
            hi = hi.log10().ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
        } else {
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    /// Fraction of the axis length at `v`, clamped to the plot area.
    fn frac(&self, v: f64) -> f64 {
        let x = if self.log { v.max(f64::MIN_POSITIVE).log10() } else { v };
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn ticks(&self) -> Vec<(f64, f64)> {
        if self.log {
            let (a, b) = (self.lo as i32, self.hi as i32);
            (a..=b).map(|k| (10f64.powi(k), (k as f64 - self.lo) / (self.hi - self.lo))).collect()
        } else {
            (0..=4)
                .map(|i| {
                    let f = i as f64 / 4.0;
                    (self.lo + f * (self.hi - self.lo), f)
                })
                .collect()
        }
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

/// Ratio against threshold with interval whiskers and a dashed line at 1.
pub fn ratio_svg(points: &[RatioPoint], log_y: bool) -> String {
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let xa = Axis::fit(points.iter().map(|p| p.u), false, points.first().map_or(0.0, |p| p.u));
    let ya = Axis::fit(points.iter().flat_map(|p| [p.ratio, p.low, p.high]), log_y, 1.0);
    let px = |u: f64| LEFT + xa.frac(u) * pw;
    let py = |v: f64| TOP + (1.0 - ya.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/>"#, TOP + ph, LEFT + pw, TOP + ph);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + ph);
    let _ = writeln!(s, "</g>");
    for (v, f) in xa.ticks() {
        let x = LEFT + f * pw;
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(v));
    }
    for (v, f) in ya.ticks() {
        let y = TOP + (1.0 - f) * ph;
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, tick_label(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">u</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">MC / asymptotic{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        if log_y { " (log scale)" } else { "" }
    );
    let one = py(1.0);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{one:.2}" x2="{}" y2="{one:.2}" stroke="gray" stroke-dasharray="6 4"/>"#, LEFT + pw);
    let _ = writeln!(s, r#"<g stroke="steelblue" fill="steelblue">"#);
    for p in points {
        if !p.ratio.is_finite() {
            continue;
        }
        let x = px(p.u);
        let (ylo, yhi) = (py(p.low), py(p.high));
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{ylo:.2}" x2="{x:.2}" y2="{yhi:.2}"/>"#);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ylo:.2}" x2="{:.2}" y2="{ylo:.2}"/>"#, x - 4.0, x + 4.0);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{yhi:.2}" x2="{:.2}" y2="{yhi:.2}"/>"#, x - 4.0, x + 4.0);
        if !log_y || p.ratio > 0.0 {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3"/>"#, py(p.ratio));
        }
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.5), "1.5");
        assert_eq!(num(14.0), "14");
        assert_eq!(num(1.2e-5), "1.2e-5");
        assert_eq!(num(-3e20), "-3e20");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn csv_lines() {
        let mut c = Csv::new("a,b");
        c.row(["1", "2"]);
        c.row(vec![num(0.5), String::new()]);
        assert_eq!(c.as_str(), "a,b\n1,2\n0.5,\n");
    }

    #[test]
    fn svg_has_reference_line_and_whiskers() {
        let pts = [RatioPoint { u: 8.0, ratio: 0.8, low: 0.7, high: 0.9 }, RatioPoint { u: 14.0, ratio: 0.95, low: 0.85, high: 1.05 }];
        for log_y in [false, true] {
            let s = ratio_svg(&pts, log_y);
            assert!(s.starts_with("<?xml") && s.trim_end().ends_with("</svg>"));
            assert!(s.contains("stroke-dasharray"));
            assert_eq!(s.matches("<circle").count(), 2);
            assert_eq!(s.matches("<svg").count(), 1);
        }
    }
}
