use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::config::PlotConfig;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Header and numeric columns of a CSV file. `#` lines are skipped.
pub struct Columns {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<Columns> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut data = vec![Vec::new(); names.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .with_context(|| format!("row {line}, column {}: {field:?} is not a number", names[i]))?;
            data[i].push(v);
        }
    }
    Ok(Columns { names, data })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1e-12);
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Line chart of the selected columns as a standalone SVG document.
pub fn render(cols: &Columns, spec: &PlotConfig, provenance: &str) -> Result<String> {
    let find = |name: &str| cols.names.iter().position(|n| n == name);
    let xi = find(&spec.x).with_context(|| format!("no column {:?} to use as x", spec.x))?;
    let ys: Vec<usize> = if spec.y.is_empty() {
        (0..cols.names.len()).filter(|&i| i != xi && cols.names[i] != "step").collect()
    } else {
        spec.y
            .iter()
            .map(|n| find(n).with_context(|| format!("no column {n:?}")))
            .collect::<Result<_>>()?
    };
    if ys.is_empty() {
        bail!("nothing to plot");
    }
    let xs = &cols.data[xi];
    let (x0, x1) = range(xs.iter().copied()).context("x column has no finite values")?;
    let (y0, y1) = range(ys.iter().flat_map(|&i| cols.data[i].iter().copied())).context("no finite y values")?;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    // "--" may not appear inside an XML comment
    writeln!(svg, "<!-- {} -->", provenance.replace("--", "- -"))?;
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    if let Some(title) = &spec.title {
        writeln!(svg, r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#, LEFT + pw / 2.0, escape(title))?;
    }
    for t in ticks(x0, x1) {
        let x = sx(t);
        writeln!(svg, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph)?;
        writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t))?;
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw)?;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t))?;
    }
    writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#)?;
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&cols.names[xi])
    )?;
    let ylabel = ys.iter().map(|&i| cols.names[i].as_str()).collect::<Vec<_>>().join(", ");
    writeln!(
        svg,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(&ylabel)
    )?;
    for (k, &i) in ys.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = xs
            .iter()
            .zip(&cols.data[i])
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "))?;
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0)?;
        writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&cols.names[i]))?;
    }
    writeln!(svg, "</svg>")?;
    Ok(svg)
}
