use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use twophoton::{fit_pattern, Geometry, ScanResult, SourceKind};

fn twophoton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twophoton"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = twophoton(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn read_json(path: &Path) -> Value {
    let body: String = data_lines(path).join("\n");
    serde_json::from_str(&body).unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let lines = data_lines(path);
    let idx = lines[0].split(',').position(|c| c == name).unwrap();
    lines[1..]
        .iter()
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn analytic_writes_three_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["analytic", "--out", out]);
    for name in ["thermal.csv", "spdc.csv", "first_order.csv"] {
        let path = dir.path().join(name);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# "), "{name} lacks a config echo");
        assert!(text.contains("seed = 0"));
        assert_eq!(data_lines(&path).len(), 42, "{name}");
    }
    let thermal = csv_column(&dir.path().join("thermal.csv"), "coincidence");
    let max = thermal.iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(max, 2.0);
    assert_eq!(thermal[20], 2.0);
}

#[test]
fn analytic_csv_refits_to_the_geometry() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["analytic", "--out", dir.path().to_str().unwrap(), "--scan.points", "121"]);
    let g = Geometry::default();
    for (name, kind) in [("thermal.csv", SourceKind::Thermal), ("spdc.csv", SourceKind::Spdc)] {
        let file = fs::File::open(dir.path().join(name)).unwrap();
        let result = ScanResult::read_csv(std::io::BufReader::new(file)).unwrap();
        assert_eq!(result.kind, kind);
        let fit = fit_pattern(&result, kind, &g).unwrap();
        assert!((fit.a_fit / g.slit_width - 1.0).abs() < 1e-3, "{name}: {fit:?}");
        assert!((fit.d_fit / g.slit_separation - 1.0).abs() < 1e-3, "{name}: {fit:?}");
    }
}

#[test]
fn speckle_default_covers_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["speckle", "--out", dir.path().to_str().unwrap()]);
    let path = dir.path().join("speckle.csv");
    let value = csv_column(&path, "value");
    let err = csv_column(&path, "std_error");
    let exact = csv_column(&path, "closed_form");
    let inside = (0..value.len())
        .filter(|&i| (value[i] - exact[i]).abs() < 3.0 * err[i])
        .count();
    assert!(inside as f64 >= 0.95 * value.len() as f64, "{inside}/{}", value.len());
}

#[test]
fn speckle_is_byte_deterministic_and_scales() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let common = ["--scan.points", "11", "--seed", "9"];
    let run = |dir: &Path, n: &str| {
        let mut args = vec!["speckle", "--out", dir.to_str().unwrap(), "--speckle.realizations", n];
        args.extend(common);
        run_ok(&args);
    };
    run(a.path(), "20000");
    run(b.path(), "20000");
    run(c.path(), "40000");
    let body = |d: &Path| fs::read_to_string(d.join("speckle.csv")).unwrap();
    // Output paths are part of the echoed config; compare the data.
    assert_eq!(data_lines(&a.path().join("speckle.csv")), data_lines(&b.path().join("speckle.csv")));
    assert!(body(a.path()).contains("seed = 9"));

    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let small = median(csv_column(&a.path().join("speckle.csv"), "std_error"));
    let large = median(csv_column(&c.path().join("speckle.csv"), "std_error"));
    let ratio = large / small;
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!((ratio / target - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["hbt", "--out", out, "--hbt.duration_s", "2"];
    run_ok(&args);
    let first = fs::read(dir.path().join("hbt_histogram.csv")).unwrap();
    let first_summary = fs::read(dir.path().join("hbt_summary.json")).unwrap();
    run_ok(&args);
    assert_eq!(first, fs::read(dir.path().join("hbt_histogram.csv")).unwrap());
    assert_eq!(first_summary, fs::read(dir.path().join("hbt_summary.json")).unwrap());
}

#[test]
fn hbt_default_shows_bunching() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["hbt", "--out", dir.path().to_str().unwrap()]);
    let summary = read_json(&dir.path().join("hbt_summary.json"));
    let g2 = summary["g2_zero"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&g2), "g2(0) = {g2}");
    let decay = summary["fit_decay_ns"].as_f64().unwrap();
    assert!((decay / 200.0 - 1.0).abs() < 0.15, "decay {decay}");
    let text = fs::read_to_string(dir.path().join("hbt_histogram.csv")).unwrap();
    assert!(text.contains("tau_ns,counts"));
    assert!(text.contains("channel_width_ns"));
}

#[test]
fn hbt_spdc_has_a_single_channel_peak() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["hbt", "--out", dir.path().to_str().unwrap(), "--source.kind", "spdc", "--hbt.duration_s", "20"]);
    let path = dir.path().join("hbt_histogram.csv");
    let tau = csv_column(&path, "tau_ns");
    let counts = csv_column(&path, "counts");
    let peak = tau.iter().position(|&t| t == 0.0).unwrap();
    let total: f64 = counts.iter().sum();
    let off_peak = total - counts[peak];
    assert!(counts[peak] > 0.95 * total);
    assert!(counts[peak - 1] < 0.01 * counts[peak] && counts[peak + 1] < 0.01 * counts[peak]);

    let summary = read_json(&dir.path().join("hbt_summary.json"));
    let r = summary["singles1_per_s"].as_f64().unwrap();
    let expected = r * r * 20.0 * 0.3e-9 * (counts.len() - 1) as f64;
    assert!((off_peak - expected).abs() < 3.0 * expected.sqrt(), "{off_peak} vs {expected}");
}

#[test]
fn hbt_laser_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["hbt", "--out", dir.path().to_str().unwrap(), "--hbt.laser", "true", "--hbt.duration_s", "20"]);
    let summary = read_json(&dir.path().join("hbt_summary.json"));
    let g2 = summary["g2_window"].as_f64().unwrap();
    let sigma = 1.0 / summary["expected_accidentals"].as_f64().unwrap().sqrt();
    assert!((g2 - 1.0).abs() < 4.0 * sigma, "g2 = {g2}");
    assert!(summary["g2_zero"].is_null());
}

fn scan_report(extra: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["scan", "--out", dir.path().to_str().unwrap()];
    args.extend(extra);
    run_ok(&args);
    assert!(dir.path().join("scan.csv").exists());
    assert!(read_json(&dir.path().join("fit.json"))["converged"].as_bool().unwrap());
    read_json(&dir.path().join("report.json"))
}

#[test]
fn scan_analytic_visibilities() {
    let thermal = scan_report(&[]);
    let v = thermal["visibility_fit"].as_f64().unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-6, "{v}");
    let spdc = scan_report(&["--source.kind", "spdc"]);
    let v = spdc["visibility_fit"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 1e-6, "{v}");
}

#[test]
fn scan_event_mc_visibility_is_diluted() {
    let report = scan_report(&[
        "--scan.engine",
        "event_mc",
        "--scan.budget",
        "2",
        "--scan.points",
        "25",
        "--scan.mode",
        "antisymmetric",
        "--scan.start=-6e-3",
        "--scan.stop=6e-3",
    ]);
    let v = report["visibility_fit"].as_f64().unwrap();
    assert!(v < 1.0 / 3.0, "{v}");
}

#[test]
fn config_file_with_aliases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[geometry]\nd = 0.2e-3\n[scan]\npoints = 11\n").unwrap();
    run_ok(&["analytic", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let text = fs::read_to_string(dir.path().join("thermal.csv")).unwrap();
    assert!(text.contains("slit_separation = 0.0002"));
    assert!(text.contains("seed = 3"));
    assert_eq!(data_lines(&dir.path().join("thermal.csv")).len(), 12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(twophoton(&["scan", "--out", out, "--geometry.width", "1"]).status.code(), Some(1));
    assert_eq!(twophoton(&["scan", "--out", out, "--geometry.a", "-1"]).status.code(), Some(1));
    assert_eq!(twophoton(&["speckle", "--out", out, "--source.kind", "spdc"]).status.code(), Some(1));
    assert_eq!(
        twophoton(&["scan", "--out", out, "--scan.engine", "speckle_mc", "--source.kind", "spdc"]).status.code(),
        Some(1)
    );
    assert_eq!(twophoton(&["analytic", "--config", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(
        twophoton(&["scan", "--out", out, "--scan.start=-1e-3", "--scan.stop=1e-3"]).status.code(),
        Some(2)
    );
    assert_eq!(twophoton(&["bogus"]).status.code(), Some(1));
}
