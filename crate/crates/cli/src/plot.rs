//! Deterministic SVG scatter plots with an optional fitted line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slelab::fit::{Axis, FitResult};

use crate::error::{CliError, CliResult};
use crate::table::{write_synced, Table};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub input: PathBuf,
    pub x: String,
    pub y: String,
    /// Column of standard errors drawn as ±1 bars.
    pub y_err: Option<String>,
    /// Keep only rows whose `column` equals `value`.
    pub filter: Option<(String, String)>,
    pub log_x: bool,
    pub log_y: bool,
    /// Drawn as `log y = intercept + slope·X` with `X = log x` or `x` per its axis.
    pub fit: Option<FitResult>,
    pub title: String,
    pub output: PathBuf,
}

impl PlotSpec {
    pub fn new(input: impl Into<PathBuf>, x: &str, y: &str, output: impl Into<PathBuf>) -> Self {
        PlotSpec {
            input: input.into(),
            x: x.to_string(),
            y: y.to_string(),
            y_err: None,
            filter: None,
            log_x: false,
            log_y: false,
            fit: None,
            title: String::new(),
            output: output.into(),
        }
    }
}

struct Point {
    x: f64,
    y: f64,
    lo: f64,
    hi: f64,
}

fn column(table: &Table, name: &str, path: &Path) -> CliResult<usize> {
    table.column(name).ok_or_else(|| {
        CliError::Input(format!(
            "{}: no column `{name}` (have {})",
            path.display(),
            table.header.join(", ")
        ))
    })
}

fn parse_cell(cell: &str) -> f64 {
    cell.trim().parse().unwrap_or(f64::NAN)
}

/// Reads the points to plot, in plot coordinates (base-10 logs on log axes).
fn load_points(request: &PlotSpec) -> CliResult<Vec<Point>> {
    if !request.input.exists() {
        return Err(CliError::Input(format!(
            "{}: input CSV does not exist",
            request.input.display()
        )));
    }
    let table = Table::read(&request.input)?;
    let xc = column(&table, &request.x, &request.input)?;
    let yc = column(&table, &request.y, &request.input)?;
    let ec = request
        .y_err
        .as_deref()
        .map(|c| column(&table, c, &request.input))
        .transpose()?;
    let fc = request
        .filter
        .as_ref()
        .map(|(c, v)| column(&table, c, &request.input).map(|i| (i, v)))
        .transpose()?;
    if table.rows.is_empty() {
        return Err(CliError::Input(format!(
            "{}: CSV has no data rows",
            request.input.display()
        )));
    }
    let tx = |v: f64, log: bool| {
        if log {
            if v > 0.0 {
                v.log10()
            } else {
                f64::NAN
            }
        } else {
            v
        }
    };
    let mut points = Vec::new();
    for row in &table.rows {
        if let Some((i, want)) = fc {
            if &row[i] != want {
                continue;
            }
        }
        let (x, y) = (parse_cell(&row[xc]), parse_cell(&row[yc]));
        let e = ec.map_or(0.0, |i| parse_cell(&row[i]));
        let e = if e.is_finite() { e.abs() } else { 0.0 };
        let p = Point {
            x: tx(x, request.log_x),
            y: tx(y, request.log_y),
            lo: tx(
                if request.log_y && y - e <= 0.0 {
                    y
                } else {
                    y - e
                },
                request.log_y,
            ),
            hi: tx(y + e, request.log_y),
        };
        if p.x.is_finite() && p.y.is_finite() {
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no plottable rows for {} against {}",
            request.input.display(),
            request.y,
            request.x
        )));
    }
    Ok(points)
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log && hi - lo >= 1.0 {
        let step = ((hi - lo) / 6.0).ceil().max(1.0);
        let mut t = (lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= hi + 1e-9 {
            out.push(t);
            t += step;
        }
        return out;
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    let shown = if log { 10f64.powf(v) } else { v };
    let a = shown.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e4).contains(&a) {
        format!("{shown:.0e}")
    } else if a >= 10.0 || (shown - shown.round()).abs() < 1e-9 {
        format!("{shown:.0}")
    } else {
        // Three significant digits, trailing zeros dropped.
        let digits = (2.0 - a.log10().floor()).max(0.0) as usize;
        let s = format!("{shown:.digits$}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fitted line endpoints over `[x0, x1]` in plot coordinates.
fn fit_segment(
    fit: &FitResult,
    x0: f64,
    x1: f64,
    request: &PlotSpec,
) -> CliResult<[(f64, f64); 2]> {
    let consistent = match fit.axis {
        Axis::LogLog => request.log_x && request.log_y,
        Axis::SemiLog => !request.log_x && request.log_y,
    };
    if !consistent {
        return Err(CliError::Input(format!(
            "a {:?} fit cannot be overlaid on these axes",
            fit.axis
        )));
    }
    let ln10 = std::f64::consts::LN_10;
    let y_at = |x: f64| {
        let abscissa = if request.log_x { x * ln10 } else { x };
        (fit.intercept + fit.slope * abscissa) / ln10
    };
    Ok([(x0, y_at(x0)), (x1, y_at(x1))])
}

/// Renders the SVG text for `request`.
pub fn render(request: &PlotSpec) -> CliResult<String> {
    let points = load_points(request)?;
    let (mut x0, mut x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.x), b.max(p.x))
        });
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pad = 0.05 * (x1 - x0);
    let (x0, x1) = (x0 - pad, x1 + pad);
    let line = request
        .fit
        .as_ref()
        .map(|f| fit_segment(f, x0, x1, request))
        .transpose()?;
    let mut ys: Vec<f64> = points
        .iter()
        .flat_map(|p| [p.lo, p.hi, p.y])
        .filter(|v| v.is_finite())
        .collect();
    if let Some(seg) = &line {
        ys.extend(seg.iter().map(|p| p.1).filter(|v| v.is_finite()));
    }
    let (mut y0, mut y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&request.title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444"/>"##
    );
    for t in ticks(x0, x1, request.log_x) {
        let px = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/>"##,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 19.0,
            tick_label(t, request.log_x)
        );
    }
    for t in ticks(y0, y1, request.log_y) {
        let py = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#444"/>"##,
            LEFT - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py + 4.0,
            tick_label(t, request.log_y)
        );
    }
    let axis_name = |name: &str, log: bool| {
        if log {
            format!("{name} (log scale)")
        } else {
            name.to_string()
        }
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&axis_name(&request.x, request.log_x))
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&axis_name(&request.y, request.log_y))
    );
    let _ = writeln!(
        s,
        r#"<clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}"/></clipPath>"#
    );
    if let (Some(seg), Some(fit)) = (&line, &request.fit) {
        let _ = writeln!(
            s,
            r##"<line class="fit" clip-path="url(#plot-area)" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="1.5"/>"##,
            sx(seg[0].0),
            sy(seg[0].1),
            sx(seg[1].0),
            sy(seg[1].1)
        );
        let _ = writeln!(
            s,
            r##"<text class="slope" data-slope="{}" data-slope-stderr="{}" x="{:.2}" y="{:.2}" text-anchor="end" fill="#c0392b">slope = {:.4} ± {:.4}</text>"##,
            fit.slope,
            fit.slope_stderr,
            LEFT + pw - 8.0,
            TOP + 18.0,
            fit.slope,
            fit.slope_stderr
        );
    }
    for p in &points {
        let (px, py) = (sx(p.x), sy(p.y));
        if p.lo.is_finite() && p.hi.is_finite() && (p.hi - p.lo) > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#2c3e50"/>"##,
                sy(p.lo),
                sy(p.hi)
            );
        }
        let _ = writeln!(
            s,
            r##"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="#2c3e50"/>"##
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the plot; on any error no file is created.
pub fn emit_plot(request: &PlotSpec) -> CliResult<PathBuf> {
    let svg = render(request)?;
    write_synced(&request.output, svg.as_bytes())?;
    Ok(request.output.clone())
}

/// The value of the `data-slope` attribute of a rendered plot.
pub fn embedded_slope(svg: &str) -> Option<f64> {
    let start = svg.find("data-slope=\"")? + "data-slope=\"".len();
    let end = start + svg[start..].find('"')?;
    svg[start..end].parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::row;
    use slelab::fit::{fit_exponent, FitSample};

    fn sample_csv(dir: &Path) -> (PathBuf, FitResult) {
        let mut t = Table::new("walk", &["k", "p", "stderr"]);
        let mut samples = Vec::new();
        for j in 8..=14 {
            let k = (1u64 << j) as f64;
            let p = 1.3 * k.powf(-0.625) * (1.0 + 0.01 * ((j * 7) % 3) as f64);
            t.push(row![k, p, 0.02 * p]);
            samples.push(FitSample::new(k, p, 0.02 * p));
        }
        let path = dir.join("walk.csv");
        write_synced(&path, &t.to_csv().unwrap()).unwrap();
        (path, fit_exponent(&samples, Axis::LogLog).unwrap())
    }

    fn request(dir: &Path, input: PathBuf, fit: FitResult) -> PlotSpec {
        PlotSpec {
            y_err: Some("stderr".into()),
            log_x: true,
            log_y: true,
            fit: Some(fit),
            title: "non-intersection".into(),
            ..PlotSpec::new(input, "k", "p", dir.join("walk.svg"))
        }
    }

    #[test]
    fn slope_label_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let (input, fit) = sample_csv(dir.path());
        let request = request(dir.path(), input, fit.clone());
        emit_plot(&request).unwrap();
        let first = std::fs::read(&request.output).unwrap();
        emit_plot(&request).unwrap();
        assert_eq!(first, std::fs::read(&request.output).unwrap());
        let svg = String::from_utf8(first).unwrap();
        assert_eq!(embedded_slope(&svg), Some(fit.slope));
        assert_eq!(svg.matches("<circle").count(), 7);
    }

    #[test]
    fn empty_or_malformed_input_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        write_synced(&empty, b"k,p,stderr\n").unwrap();
        let (_, fit) = sample_csv(dir.path());
        let s = request(dir.path(), empty, fit.clone());
        assert!(emit_plot(&s).is_err());
        assert!(!s.output.exists());

        let (input, _) = sample_csv(dir.path());
        let missing = PlotSpec {
            y: "q".into(),
            ..request(dir.path(), input.clone(), fit.clone())
        };
        assert!(matches!(emit_plot(&missing), Err(CliError::Input(m)) if m.contains("`q`")));
        let wrong_axes = PlotSpec {
            log_x: false,
            ..request(dir.path(), input, fit)
        };
        assert!(emit_plot(&wrong_axes).is_err());
        assert!(!dir.path().join("walk.svg").exists());
    }

    #[test]
    fn tick_placement() {
        assert_eq!(ticks(2.3, 4.3, true), vec![3.0, 4.0]);
        let lin = ticks(0.0, 1.0, false);
        assert_eq!(lin.len(), 6);
        assert!(lin
            .iter()
            .enumerate()
            .all(|(k, t)| (t - 0.2 * k as f64).abs() < 1e-12));
        assert_eq!(tick_label(3.0, true), "1000");
        assert_eq!(tick_label(-2.0, true), "0.01");
        assert_eq!(tick_label(0.25, false), "0.25");
    }
}
