use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_text, RunManifestEntry};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One aggregate curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub k: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Deserialize)]
struct AggregateRow {
    k: usize,
    mean_delta_sq: f64,
    stderr: f64,
}

fn manifest_label(path: &Path) -> Option<String> {
    let dir = path.parent()?;
    let text = fs::read_to_string(dir.join("manifest.json")).ok()?;
    let entries: Vec<RunManifestEntry> = serde_json::from_str(&text).ok()?;
    let name = path.file_name()?;
    entries
        .into_iter()
        .find(|e| e.aggregate_csv.file_name() == Some(name))
        .map(|e| e.label)
}

/// Reads a `k,mean_delta_sq,stderr` file. The label comes from a sibling
/// `manifest.json` when present, else from the file name.
pub fn read_aggregate_csv(path: &Path) -> Result<Series> {
    if !path.exists() {
        return Err(Error::MissingInput(format!("{} does not exist", path.display())));
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut series = Series {
        label: manifest_label(path).unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().trim_end_matches("_aggregate").to_string())
                .unwrap_or_default()
        }),
        k: Vec::new(),
        mean: Vec::new(),
        stderr: Vec::new(),
    };
    for row in reader.deserialize() {
        let row: AggregateRow = row?;
        series.k.push(row.k);
        series.mean.push(row.mean_delta_sq);
        series.stderr.push(row.stderr);
    }
    if series.k.is_empty() {
        return Err(Error::MissingInput(format!("{} has no rows", path.display())));
    }
    Ok(series)
}

fn value_range(series: &[Series]) -> (f64, f64, f64, f64) {
    let k_max = series
        .iter()
        .flat_map(|s| s.k.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let k_min = series.iter().flat_map(|s| s.k.iter().copied()).min().unwrap_or(0) as f64;
    let positive = series
        .iter()
        .flat_map(|s| s.mean.iter().copied())
        .filter(|&v| v > 0.0);
    let (mut lo, mut hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        lo = 1.0;
        hi = 1.0;
    }
    let (mut y_lo, mut y_hi) = (lo.log10().floor(), hi.log10().ceil());
    if y_hi <= y_lo {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    (k_min, k_max.max(k_min + 1.0), y_lo, y_hi)
}

/// Maps each series to plot coordinates: `k` linear, `mean` on a log10
/// axis, non-positive values clamped to the bottom edge.
pub fn project_series(series: &[Series]) -> Vec<Vec<(f64, f64)>> {
    let (k_min, k_max, y_lo, y_hi) = value_range(series);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    series
        .iter()
        .map(|s| {
            s.k.iter()
                .zip(&s.mean)
                .map(|(&k, &m)| {
                    let x = LEFT + (k as f64 - k_min) / (k_max - k_min) * plot_w;
                    let ly = if m > 0.0 { m.log10().clamp(y_lo, y_hi) } else { y_lo };
                    let y = TOP + (y_hi - ly) / (y_hi - y_lo) * plot_h;
                    (x, y)
                })
                .collect()
        })
        .collect()
}

fn render_svg(series: &[Series]) -> String {
    let (k_min, k_max, y_lo, y_hi) = value_range(series);
    let points = project_series(series);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let decades = (y_hi - y_lo) as i32;
    for i in 0..=decades {
        let e = y_lo as i32 + i;
        let y = y1 - i as f64 / decades as f64 * (y1 - y0);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    for i in 0..=4 {
        let k = k_min + (k_max - k_min) * i as f64 / 4.0;
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 16.0,
            k.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">k</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">mean delta_k^2</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (i, (s, pts)) in series.iter().zip(&points).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = y0 + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotOutput {
    pub series: Vec<String>,
    pub svg: PathBuf,
    pub csv: PathBuf,
}

/// Reads aggregate CSVs and writes `plot.svg` (log-scale mean `delta_k^2`
/// against `k`, one line per input) and the tidy `plot_data.csv` under `out`.
pub fn cmd_plot_data(inputs: &[PathBuf], out: &Path) -> Result<PlotOutput> {
    if inputs.is_empty() {
        return Err(Error::MissingInput("no aggregate files given".into()));
    }
    let series: Vec<Series> = inputs
        .iter()
        .map(|p| read_aggregate_csv(p))
        .collect::<Result<_>>()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let svg = out.join("plot.svg");
    write_text(&svg, &render_svg(&series))?;
    let csv_path = out.join("plot_data.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["series", "k", "mean_delta_sq", "stderr"])?;
    for s in &series {
        for i in 0..s.k.len() {
            w.write_record([
                s.label.clone(),
                s.k[i].to_string(),
                s.mean[i].to_string(),
                s.stderr[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(PlotOutput {
        series: series.into_iter().map(|s| s.label).collect(),
        svg,
        csv: csv_path,
    })
}
