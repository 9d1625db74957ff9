use std::path::Path;
use std::process::{Command, Output};

use dampwave::lab::{emit_reports, run_bundle, LabConfig, ReportBundle, RunOptions, Status};

const SHORT: &str = r#"
schema_version = 1

[[experiment]]
name = "si_half_curve"
kind = "norm_curve"
coefficient = { kind = "scale_invariant", mu = 0.5 }
grid = { t_min = 10.0, t_max = 1000.0, t_points = 11 }
query = [{ n = 3, p = 2.0, q = 2.0, r_p = 1.0 }]
tolerances = { exponent = 0.05 }

[[experiment]]
name = "si_half_band"
kind = "sharpness"
coefficient = { kind = "scale_invariant", mu = 0.5 }
grid = { t_min = 10.0, t_max = 1000.0, t_points = 11 }
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampwave"))
        .args(args)
        .env("RUST_LOG", "error")
        .env_remove("DAMPWAVE_OUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("lab.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_profiles_names_every_kind() {
    let out = cli(&["list-profiles"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in ["zero", "constant", "scale_invariant", "power", "iterated_log", "integrable"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind} missing:\n{text}");
    }
}

#[test]
fn validate_accepts_a_good_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = cli(&["validate", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("2 experiment(s)"));
}

#[test]
fn unknown_fields_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SHORT.replace("t_points = 11 }", "t_points = 11, t_pionts = 3 }"));
    assert_eq!(cli(&["validate", &cfg]).status.code(), Some(4));
    assert!(LabConfig::from_toml("schema_version = 2\nexperiment = []").is_err());
}

#[test]
fn only_runs_the_named_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("out");
    let out = cli(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--only", "si_half_band", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary_si_half_band.json").exists());
    assert!(!out_dir.join("summary_si_half_curve.json").exists());

    let summary = std::fs::read_to_string(out_dir.join("summary_si_half_band.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let text = summary.to_string();
    for key in ["band_low", "band_high", "verdict"] {
        assert!(text.contains(&format!("\"{key}\"")), "{key} missing from {text}");
    }

    let missing = cli(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--only", "nope"]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn curve_csv_has_header_and_full_precision() {
    let cfg = LabConfig::from_toml(SHORT).unwrap();
    let opts = RunOptions {
        only: Some("si_half_curve".into()),
        seed: None,
    };
    let bundle = run_bundle(&cfg, &opts).unwrap();
    assert_eq!(bundle.status(), Status::Pass);
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&bundle, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("curve_si_half_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    for row in rows {
        let (t, v) = row.split_once(',').unwrap();
        assert!(t.parse::<f64>().is_ok() && v.parse::<f64>().unwrap() > 0.0);
        assert_eq!(v.split('e').next().unwrap().trim_start_matches('-').len(), 18, "{row}");
    }
}

#[test]
fn empty_bundle_writes_only_the_digest() {
    let bundle = ReportBundle::new(Vec::new());
    assert_eq!(bundle.exit_code(), 0);
    let dir = tempfile::tempdir().unwrap();
    let written = emit_reports(&bundle, dir.path()).unwrap();
    assert_eq!(written.len(), 1);
    let digest = std::fs::read_to_string(&written[0]).unwrap();
    assert!(written[0].ends_with("report.md"));
    assert!(digest.contains("no experiments"));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = LabConfig::from_toml(SHORT).unwrap();
    let again = LabConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
}
