//! Report emission: CSV rows, JSON metadata and an SVG plot of error against K.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use srcstab::experiment::{ExperimentReport, ReportRow};

pub const CSV_HEADER: [&str; 10] = ["K", "epsilon", "E", "k_trunc", "err_l2_f0", "err_hm1_f1", "err_h1_f0", "err_l2_f1", "ceiling", "wall_s"];

/// One CSV line; absent values are empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    #[serde(rename = "K")]
    pub k: f64,
    pub epsilon: f64,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub k_trunc: Option<f64>,
    pub err_l2_f0: Option<f64>,
    pub err_hm1_f1: Option<f64>,
    pub err_h1_f0: Option<f64>,
    pub err_l2_f1: Option<f64>,
    pub ceiling: Option<f64>,
    pub wall_s: f64,
}

impl From<&ReportRow> for CsvRow {
    fn from(r: &ReportRow) -> Self {
        CsvRow {
            k: r.k,
            epsilon: r.epsilon,
            e: r.e,
            k_trunc: r.k_trunc,
            err_l2_f0: r.err_l2_f0,
            err_hm1_f1: r.err_hm1_f1,
            err_h1_f0: r.err_h1_f0,
            err_l2_f1: r.err_l2_f1,
            ceiling: r.ceiling,
            wall_s: r.wall_s,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in rows {
        wtr.serialize(CsvRow::from(r))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == CSV_HEADER, "unexpected CSV header {header:?}");
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn write_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// log₁₀ error against log₂ K with the calibrated ceiling dashed and the noise floor dotted.
pub fn render_svg(report: &ExperimentReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    let err: Vec<(f64, f64)> = report.rows.iter().filter_map(|r| Some((r.k, r.err_total()?))).collect();
    let ceil: Vec<(f64, f64)> = report.rows.iter().filter_map(|r| Some((r.k, r.ceiling?))).collect();
    let floor = report.trend.noise_floor;

    let pos = |v: f64| v > 0.0 && v.is_finite();
    let xs: Vec<f64> = report.rows.iter().map(|r| r.k).filter(|&k| pos(k)).map(f64::log2).collect();
    let ys: Vec<f64> = err.iter().chain(&ceil).map(|p| p.1).chain(floor).filter(|&v| pos(v)).map(f64::log10).collect();
    let range = |v: &[f64], lo_pad: f64| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - lo_pad, hi + lo_pad)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&xs, 0.5);
    let (y0, y1) = range(&ys, 0.5);
    let (y0, y1) = (y0.floor(), y1.ceil());
    let sx = |k: f64| PAD + (k.log2() - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let line = |pts: &[(f64, f64)]| {
        pts.iter().filter(|p| pos(p.0) && pos(p.1)).map(|&(k, v)| format!("{:.2},{:.2}", sx(k), sy(v))).collect::<Vec<_>>().join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><line x1="{PAD}" y1="{}" x2="{}" y2="{}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}"/></g>"#, H - PAD, W - PAD, H - PAD, H - PAD);
    for r in &report.rows {
        if pos(r.k) {
            let x = sx(r.k);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, H - PAD + 18.0, fmt_num(r.k));
        }
    }
    for d in (y0 as i64)..=(y1 as i64) {
        let y = sy(10f64.powi(d as i32));
        let _ = writeln!(s, r#"<text x="{}" y="{y:.2}" text-anchor="end">1e{d}</text>"#, PAD - 6.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">K</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">relative error</text>"#, H / 2.0, H / 2.0);
    if let Some(f) = floor.filter(|&f| pos(f)) {
        let y = sy(f);
        let _ = writeln!(s, r#"<line x1="{PAD}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="gray" stroke-dasharray="2 3"/>"#, W - PAD);
    }
    if !ceil.is_empty() {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="firebrick" stroke-dasharray="6 4"/>"#, line(&ceil));
    }
    if !err.is_empty() {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line(&err));
        for &(k, v) in err.iter().filter(|p| pos(p.0) && pos(p.1)) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(k), sy(v));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="end">{}</text>"#, W - PAD, escape(&format!("config {}", &report.config_hash[..report.config_hash.len().min(12)])));
    s.push_str("</svg>\n");
    s
}

fn fmt_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else {
        format!("{v:.3}")
    }
}

/// CSV, JSON and SVG under `dir` as report.{csv,json,svg}.
pub fn emit_report(report: &ExperimentReport, dir: &Path, svg: bool) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let f = std::fs::File::create(dir.join("report.csv")).with_context(|| format!("writing {}", dir.join("report.csv").display()))?;
    write_csv(&report.rows, std::io::BufWriter::new(f))?;
    write_json(report, &dir.join("report.json"))?;
    if svg {
        std::fs::write(dir.join("report.svg"), render_svg(report))?;
    }
    Ok(())
}
