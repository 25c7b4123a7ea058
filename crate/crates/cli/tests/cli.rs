use std::path::Path;
use std::process::Command;

use srcstab::experiment::{ExperimentConfig, ExperimentReport, ReportRow, TrendStats, VERSION};
use srcstab::functionals::Physics;
use srcstab::source::{Bump, SourceDesc};
use srcstab::sweep::{FrequencyGrid, FrequencySweep, C64};
use srcstab_cli::container::{read_sweep, read_volume, write_sweep, write_volume};
use srcstab_cli::report::{read_csv, render_svg, write_csv, CSV_HEADER};

fn row(k: f64, err: Option<f64>) -> ReportRow {
    ReportRow {
        k,
        epsilon: 1e-2,
        e: Some(-(1e-2f64).ln()),
        k_trunc: Some(k.powf(2.0 / 3.0) * 0.1 + 1.0 / 3.0),
        err_l2_f0: err,
        err_hm1_f1: err.map(|e| e * 1e-3),
        err_h1_f0: err.map(|e| 7.0 * e),
        err_l2_f1: None,
        ceiling: err.map(|e| 0.1 + e),
        wall_s: 0.0,
        config_hash: "abc".into(),
        version: VERSION.into(),
        error: None,
    }
}

fn report(rows: Vec<ReportRow>) -> ExperimentReport {
    let config = ExperimentConfig::example(Physics::Scalar);
    ExperimentReport {
        version: VERSION.into(),
        config_hash: config.hash(),
        config,
        reference_norm: 1.0,
        signal_scale: 1.0,
        m_rel: 3.0,
        constant_c: Some(0.4),
        self_calibrated: true,
        rows,
        trend: TrendStats { noise_floor: Some(2e-3), ..Default::default() },
    }
}

#[test]
fn empty_report_gives_headers_only() {
    let mut buf = Vec::new();
    write_csv(&[], &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    assert!(read_csv(buf.as_slice()).unwrap().is_empty());
}

#[test]
fn csv_round_trip_is_exact() {
    let mut rows = vec![row(1.0, Some(0.1 + 0.2)), row(2.0, Some(1e-300)), row(4.0, None), row(8.0, Some(std::f64::consts::PI))];
    rows[1].wall_s = 0.123456789012345678;
    rows[2].e = None;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rows.len());
    for (b, r) in back.iter().zip(&rows) {
        assert_eq!(b, &srcstab_cli::report::CsvRow::from(r));
    }
    let third = String::from_utf8(buf).unwrap().lines().nth(3).unwrap().to_string();
    assert!(third.starts_with("4.0,0.01,,"), "{third}");
}

#[test]
fn svg_is_well_formed() {
    let full = report(vec![row(1.0, Some(0.9)), row(2.0, Some(0.5)), row(4.0, None), row(8.0, Some(0.01))]);
    for r in [full, report(vec![]), report(vec![row(3.0, Some(0.2))])] {
        let svg = render_svg(&r);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(!svg.contains("NaN") && !svg.contains("inf"), "{svg}");
    }
    let svg = render_svg(&report(vec![row(1.0, Some(0.9)), row(2.0, Some(0.5))]));
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
}

#[test]
fn containers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse();
    let domain = cfg.domain().unwrap();
    let grid = FrequencyGrid::new(0.5, 3).unwrap();
    let mut sw = FrequencySweep::zeros(&domain.mesh, &grid, 1, false);
    for (i, v) in sw.values.iter_mut().enumerate() {
        *v = C64::new(i as f64 / 7.0, -(i as f64).sqrt());
    }
    let p = dir.path().join("s.bin");
    write_sweep(&p, &sw).unwrap();
    assert_eq!(read_sweep(&p).unwrap(), sw);

    let mut src = srcstab::source::rasterize_source(&cfg.source, &domain, 1).unwrap();
    src.f1[3] = -2.5;
    let p = dir.path().join("v.bin");
    write_volume(&p, &src).unwrap();
    assert_eq!(read_volume(&p).unwrap(), src);
}

/// Coarse scalar config: h = 1/8 with a bump narrow enough for the standoff.
fn coarse() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::example(Physics::Scalar);
    cfg.h = 1.0 / 8.0;
    cfg.source = SourceDesc { f0: vec![Bump::gaussian([0.0; 3], 1.0, 0.15)], f1: vec![] };
    cfg
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = coarse();
    cfg.omega_max = 4.0;
    cfg.k_ladder = vec![1.0, 2.0, 4.0];
    let p = dir.join("cfg.json");
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

fn srcstab(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_srcstab")).args(args).env("RUST_LOG", "warn").output().unwrap();
    out.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (cfg, out) = (cfg.to_str().unwrap(), dir.path().join("out"));
    let out = out.to_str().unwrap();

    assert_eq!(srcstab(&["--config", cfg, "--out", out, "synth"]), 0);
    assert_eq!(srcstab(&["--config", cfg, "--out", out, "noise"]), 0);
    assert_eq!(srcstab(&["--config", cfg, "--out", out, "--threads", "1", "reconstruct", "--k", "2"]), 0);
    let errs: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/reconstruction.json")).unwrap()).unwrap();
    assert!(errs["err_l2_f0"].as_f64().unwrap() > 0.0);

    // a tolerance no run can meet is a verification failure, not an error
    assert_eq!(srcstab(&["--config", cfg, "--out", out, "check-duality", "--tol", "0"]), 2);
    assert_eq!(srcstab(&["--config", "/nonexistent.json", "--out", out, "synth"]), 1);
    assert_eq!(srcstab(&["--config", cfg, "--out", out, "report"]), 1);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"shape": 3}"#).unwrap();
    assert_eq!(srcstab(&["--config", bad.to_str().unwrap(), "--out", out, "synth"]), 1);
}

#[test]
fn report_command_reemits_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(vec![row(1.0, Some(0.5)), row(2.0, Some(0.25))]);
    srcstab_cli::report::write_json(&r, &dir.path().join("report.json")).unwrap();
    assert_eq!(srcstab(&["--out", dir.path().to_str().unwrap(), "report"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    roxmltree::Document::parse(&std::fs::read_to_string(dir.path().join("report.svg")).unwrap()).unwrap();
}
