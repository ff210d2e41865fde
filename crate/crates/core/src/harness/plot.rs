//! Minimal deterministic SVG charts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlotStyle {
    #[default]
    Line,
    Bar,
    /// Bars stacked in series order at each x.
    Stacked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
    /// Dashed line, for reference curves.
    #[serde(default)]
    pub dashed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    /// Vertical line at `x` when `horizontal` is false, else at `y = x`.
    pub at: f64,
    #[serde(default)]
    pub horizontal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub style: PlotStyle,
    pub series: Vec<Series>,
    #[serde(default)]
    pub markers: Vec<Marker>,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#d62728", "#8c564b", "#fa8072", "#d4a017", "#2ca02c", "#9467bd", "#1f3a93", "#6fa8dc", "#17becf", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.abs() < 1e-3 || x.abs() >= 1e4 {
        return format!("{x:.1e}");
    }
    let s = format!("{x:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Round-number ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

/// Result of rendering: the document plus a note per skipped value.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub svg: String,
    pub warnings: Vec<String>,
}

pub fn render(chart: &Chart) -> Result<Rendered> {
    if chart.series.is_empty() || chart.series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::invalid("nothing to plot"));
    }
    let mut warnings = Vec::new();
    for s in &chart.series {
        for p in &s.points {
            if !p.x.is_finite() || !p.y.is_finite() {
                warnings.push(format!("series `{}`: non-finite value at x = {}", s.label, p.x));
            }
        }
    }
    let finite = |p: &&Point| p.x.is_finite() && p.y.is_finite();
    let xs: Vec<f64> = chart.series.iter().flat_map(|s| s.points.iter().filter(finite).map(|p| p.x)).collect();
    if xs.is_empty() {
        return Err(Error::invalid("no finite points to plot"));
    }
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut y0 = 0.0f64;
    let mut y1 = f64::NEG_INFINITY;
    match chart.style {
        PlotStyle::Stacked => {
            for &x in &xs {
                let total: f64 = chart
                    .series
                    .iter()
                    .flat_map(|s| s.points.iter().filter(|p| p.x == x && p.y.is_finite()).map(|p| p.y))
                    .sum();
                y1 = y1.max(total);
            }
        }
        _ => {
            for s in &chart.series {
                for p in s.points.iter().filter(finite) {
                    let e = p.err.unwrap_or(0.0);
                    y0 = y0.min(p.y - e);
                    y1 = y1.max(p.y + e);
                }
            }
        }
    }
    for m in &chart.markers {
        if m.horizontal {
            y1 = y1.max(m.at);
        } else {
            x0 = x0.min(m.at);
            x1 = x1.max(m.at);
        }
    }
    if chart.style != PlotStyle::Line {
        let gap = bar_gap(&xs);
        x0 -= gap / 2.0;
        x1 += gap / 2.0;
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        num(LEFT + pw / 2.0),
        esc(&chart.title)
    );
    for t in ticks(x0, x1) {
        let x = num(sx(t));
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#dddddd"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"##,
            num(TOP),
            num(TOP + ph),
            num(TOP + ph + 16.0),
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = num(sy(t));
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"##,
            num(LEFT),
            num(LEFT + pw),
            num(LEFT - 6.0),
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(LEFT),
        num(TOP),
        num(pw),
        num(ph)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(LEFT + pw / 2.0),
        num(H - 14.0),
        esc(&chart.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        num(TOP + ph / 2.0),
        num(TOP + ph / 2.0),
        esc(&chart.y_label)
    );

    match chart.style {
        PlotStyle::Line => draw_lines(&mut out, chart, &sx, &sy),
        PlotStyle::Bar | PlotStyle::Stacked => draw_bars(&mut out, chart, &xs, &sx, &sy, y0),
    }
    for (k, m) in chart.markers.iter().enumerate() {
        let colour = "#444444";
        if m.horizontal {
            let y = num(sy(m.at));
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-dasharray="2,3"/>"#,
                num(LEFT),
                num(LEFT + pw)
            );
        } else {
            let x = num(sx(m.at));
            let _ = writeln!(
                out,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{colour}" stroke-dasharray="2,3"/>"#,
                num(TOP),
                num(TOP + ph)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{colour}">{}</text>"#,
            num(LEFT + 4.0),
            num(TOP + 12.0 + 12.0 * k as f64),
            esc(&format!("{} = {}", m.label, tick_label(m.at)))
        );
    }
    // legend
    for (i, s) in chart.series.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = LEFT + pw + 12.0;
        let c = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{c}" stroke-width="3"{dash}/><text x="{}" y="{}" dominant-baseline="middle">{}</text>"#,
            num(x),
            num(y),
            num(x + 22.0),
            num(y),
            num(x + 28.0),
            num(y),
            esc(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(Rendered { svg: out, warnings })
}

fn bar_gap(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min).min(1.0).max(1e-9)
}

fn draw_lines(out: &mut String, chart: &Chart, sx: &dyn Fn(f64) -> f64, sy: &dyn Fn(f64) -> f64) {
    for (i, s) in chart.series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        // non-finite points split the line
        let mut run: Vec<String> = Vec::new();
        let mut flush = |run: &mut Vec<String>| {
            if run.len() == 1 {
                let _ = writeln!(out, r#"<circle cx="{}" r="2" fill="{c}"/>"#, run[0].replace(',', r#"" cy=""#));
            } else if run.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{c}" stroke-width="1.5"{dash} points="{}"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for p in &s.points {
            if p.x.is_finite() && p.y.is_finite() {
                run.push(format!("{},{}", num(sx(p.x)), num(sy(p.y))));
            } else {
                flush(&mut run);
            }
        }
        flush(&mut run);
        for p in s.points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
            if let Some(e) = p.err.filter(|e| e.is_finite() && *e > 0.0) {
                let x = num(sx(p.x));
                let _ = writeln!(
                    out,
                    r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{c}"/>"#,
                    num(sy(p.y - e)),
                    num(sy(p.y + e))
                );
            }
        }
    }
}

fn draw_bars(
    out: &mut String,
    chart: &Chart,
    xs: &[f64],
    sx: &dyn Fn(f64) -> f64,
    sy: &dyn Fn(f64) -> f64,
    y0: f64,
) {
    let gap = bar_gap(xs);
    let ns = chart.series.len() as f64;
    let stacked = chart.style == PlotStyle::Stacked;
    let full = (sx(gap) - sx(0.0)) * 0.8;
    let bw = if stacked { full } else { full / ns };
    let mut base: Vec<(f64, f64)> = Vec::new();
    for (i, s) in chart.series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        for p in s.points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
            let (lo, hi) = if stacked {
                let slot = match base.iter_mut().find(|(x, _)| *x == p.x) {
                    Some(b) => b,
                    None => {
                        base.push((p.x, y0));
                        base.last_mut().expect("just pushed")
                    }
                };
                let lo = slot.1;
                slot.1 += p.y;
                (lo, slot.1)
            } else {
                (y0, p.y)
            };
            let left = if stacked {
                sx(p.x) - full / 2.0
            } else {
                sx(p.x) - full / 2.0 + bw * i as f64
            };
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{c}"/>"#,
                num(left),
                num(sy(hi)),
                num(bw),
                num((sy(lo) - sy(hi)).max(0.0))
            );
            if let Some(e) = p.err.filter(|e| e.is_finite() && *e > 0.0 && !stacked) {
                let x = num(left + bw / 2.0);
                let _ = writeln!(
                    out,
                    r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
                    num(sy(p.y - e)),
                    num(sy(p.y + e))
                );
            }
        }
    }
}

/// Long-format CSV with columns `series,x,y,err`.
pub fn chart_csv(chart: &Chart) -> String {
    let mut out = String::from("series,x,y,err\n");
    for s in &chart.series {
        for p in &s.points {
            let err = p.err.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{err}", csv_field(&s.label), p.x, p.y);
        }
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Parse the long-format CSV written by [`chart_csv`]; series keep first-seen order.
pub fn series_from_csv(text: &str) -> Result<Vec<Series>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse("csv", "empty input"))?;
    if split_csv_line(header) != ["series", "x", "y", "err"] {
        return Err(Error::parse("csv", format!("expected header `series,x,y,err`, got `{header}`")));
    }
    let mut out: Vec<Series> = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f = split_csv_line(line);
        if f.len() != 4 {
            return Err(Error::parse("csv", format!("line {}: expected 4 fields", i + 2)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse("csv", format!("line {}: bad number `{s}`", i + 2)))
        };
        let p = Point {
            x: parse(&f[1])?,
            y: parse(&f[2])?,
            err: if f[3].trim().is_empty() { None } else { Some(parse(&f[3])?) },
        };
        match out.iter_mut().find(|s| s.label == f[0]) {
            Some(s) => s.points.push(p),
            None => out.push(Series {
                label: f[0].clone(),
                points: vec![p],
                dashed: false,
            }),
        }
    }
    Ok(out)
}
