//! SVG line plots of episode CSVs: altitude against horizontal distance and
//! horizontal speed against time.

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::{Error, Result};

/// Numeric columns of a CSV file keyed by header name. Non-numeric cells
/// become NaN.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Columns {
    pub names: Vec<String>,
    data: HashMap<String, Vec<f64>>,
}

impl Columns {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut cols = vec![Vec::new(); names.len()];
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != names.len() {
                return Err(Error::Format(format!("CSV row {}: {} cells, header has {}", i + 2, cells.len(), names.len())));
            }
            for (c, cell) in cols.iter_mut().zip(cells) {
                c.push(cell.trim().parse().unwrap_or(f64::NAN));
            }
        }
        let data = names.iter().cloned().zip(cols).collect();
        Ok(Columns { names, data })
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.data.get(name).map(|v| v.as_slice()).ok_or_else(|| Error::Format(format!("CSV has no '{name}' column")))
    }

    pub fn rows(&self) -> usize {
        self.data.values().next().map_or(0, |v| v.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 30.0, 50.0]; // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 { 1.0 } else if f < 3.5 { 2.0 } else if f < 7.5 { 5.0 } else { 10.0 }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        (lo, lo + 1.0)
    } else {
        (lo, hi)
    }
}

/// Renders the series as SVG paths with axes, ticks and a legend.
pub fn line_plot(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let (xs, ys) = (nice_step(x1 - x0), nice_step(y1 - y0));
    let (x1, y1) = ((x1 / xs).ceil() * xs, (y1 / ys).ceil() * ys);
    let (x0, y0) = ((x0 / xs).floor() * xs, (y0 / ys).floor() * ys);
    let [ml, mr, mt, mb] = MARGIN;
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (W - ml - mr);
    let py = |y: f64| H - mb - (y - y0) / (y1 - y0) * (H - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r##"<g stroke="#ccc" stroke-width="0.5">"##);
    let ticks = |lo: f64, hi: f64, step: f64| {
        let n = ((hi - lo) / step).round() as i64;
        (0..=n).map(move |i| lo + i as f64 * step)
    };
    for x in ticks(x0, x1, xs) {
        let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}"/>"#, px(x), py(y0), py(y1));
    }
    for y in ticks(y0, y1, ys) {
        let _ = writeln!(s, r#"<line x1="{1}" y1="{0}" x2="{2}" y2="{0}"/>"#, py(y), px(x0), px(x1));
    }
    s.push_str("</g>\n");
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - ml - mr, H - mt - mb);
    for x in ticks(x0, x1, xs) {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, px(x), H - mb + 16.0, tick_label(x));
    }
    for y in ticks(y0, y1, ys) {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, ml - 6.0, py(y) + 4.0, tick_label(y));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ml + W - mr) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (mt + H - mb) / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &ser.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{} {} ", if pen_down { "L" } else { "M" }, px(x), py(y));
            pen_down = true;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = mt + 14.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/>"#, ml + 10.0, ly, ml + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, ml + 36.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Pairs two columns of an episode CSV into a series.
pub fn series_from(cols: &Columns, x: &str, y: &str, label: &str) -> Result<Series> {
    let points = cols.get(x)?.iter().copied().zip(cols.get(y)?.iter().copied()).collect();
    Ok(Series { label: label.to_string(), points })
}

/// The two standard takeoff figures for a set of labelled episode CSVs:
/// (altitude vs distance, horizontal speed vs time).
pub fn takeoff_figures(runs: &[(String, Columns)]) -> Result<(String, String)> {
    let mut traj = Vec::new();
    let mut speed = Vec::new();
    for (label, cols) in runs {
        traj.push(series_from(cols, "x", "y", label)?);
        speed.push(series_from(cols, "t", "v_x", label)?);
    }
    Ok((
        line_plot(&traj, "Takeoff trajectory", "x [m]", "y [m]"),
        line_plot(&speed, "Horizontal speed", "t [s]", "V_x [m/s]"),
    ))
}
