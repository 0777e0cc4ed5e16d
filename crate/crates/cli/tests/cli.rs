use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fogduty_core::config::REFERENCE_TOML;

fn fogduty(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogduty"))
        .env_remove("FOGDUTY_CONFIG")
        .args(args)
        .output()
        .expect("failed to spawn fogduty")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Column `key` of a CSV file.
fn column(csv: &str, key: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == key).unwrap_or_else(|| panic!("no column {key}"));
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("fleet.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn reproduce_tables_writes_table6_delays() {
    let dir = tempfile::tempdir().unwrap();
    let o = fogduty(&["reproduce-tables", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t6 = fs::read_to_string(dir.path().join("table6.csv")).unwrap();
    assert_eq!(column(&t6, "system_time_ms"), ["352", "210", "150", "116"]);
    assert_eq!(column(&t6, "lambda_pps"), ["150", "100", "75", "60"]);
    assert_eq!(column(&t6, "load"), ["0.260", "0.174", "0.130", "0.104"]);
    for id in 1..=11 {
        assert!(dir.path().join(format!("table{id}.csv")).is_file(), "table{id}");
    }
    assert!(dir.path().join("deviations.csv").is_file());
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn reproduce_tables_strict_passes_on_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = fogduty(&["reproduce-tables", "--strict", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    assert_eq!(summary.lines().filter(|l| l.ends_with(" ok")).count(), 11, "{summary}");
    let deviations = fs::read_to_string(dir.path().join("deviations.csv")).unwrap();
    let known = deviations.lines().filter(|l| l.contains(",false,") && !l.ends_with(',')).count();
    assert_eq!(known, 3, "{deviations}");
}

#[test]
fn analyze_schedule_ls4_gives_condo_savings() {
    let o = fogduty(&["analyze-schedule", "--ls", "4", "--table", "table10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(column(&out, "savings_pct").last().unwrap(), "61.51");
    assert_eq!(column(&out, "extra_savings_pct").last().unwrap(), "3.11");
    assert!(stderr(&o).contains("condominium E = 61.51 %"));
    assert_eq!(out, fs::read_to_string(data("analyze_schedule_table10.csv")).unwrap());
}

#[test]
fn analyze_schedule_ls_changes_the_result() {
    let o = fogduty(&["analyze-schedule", "--ls", "58", "--table", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&stdout(&o), "savings_pct").last().unwrap(), "72.80");
}

#[test]
fn analyze_queue_matches_golden_output() {
    let o = fogduty(&["analyze-queue", "--table", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), fs::read_to_string(data("analyze_queue_table6.csv")).unwrap());
}

#[test]
fn analyze_queue_feedback_override() {
    let o = fogduty(&["analyze-queue", "--table", "table7", "--feedback", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(column(&out, "feedback_pct"), ["20"]);
    let fb = fogduty(&["analyze-queue", "--table", "table7", "--feedback", "1.5"]);
    assert!(!fb.status.success());
    assert!(stderr(&fb).contains("link.feedback_fractions"), "{}", stderr(&fb));
}

#[test]
fn empty_fleet_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &REFERENCE_TOML.replace("size = 300", "size = 0"));
    let o = fogduty(&["--config", cfg.to_str().unwrap(), "analyze-energy"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("fleet.size"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn config_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &REFERENCE_TOML.replace("size = 300", "size = 0"));
    let o = Command::new(env!("CARGO_BIN_EXE_fogduty"))
        .env("FOGDUTY_CONFIG", &cfg)
        .args(["analyze-queue"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("fleet.size"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &REFERENCE_TOML.replace("size = 300", "size = = 300"));
    let o = fogduty(&["--config", cfg.to_str().unwrap(), "analyze-energy"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 9"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_fails() {
    let o = fogduty(&["--config", "/nonexistent/fogduty.toml", "analyze-energy"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/fogduty.toml"));
}

#[test]
fn unknown_table_is_an_error() {
    let o = fogduty(&["reproduce-tables", "--table", "table12"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown table 'table12'"), "{}", stderr(&o));
    let wrong_group = fogduty(&["analyze-energy", "--table", "table6"]);
    assert!(!wrong_group.status.success());
    assert!(stderr(&wrong_group).contains("table6 is not produced by analyze-energy"));
}

#[test]
fn identical_inputs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = fogduty(&["reproduce-tables", "--format", "json", "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn json_tables_parse() {
    let o = fogduty(&["analyze-energy", "--format", "json", "--table", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["table"], "table3");
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert!(v["rows"][0][8].is_null());
}

#[test]
fn full_precision_flag() {
    let o = fogduty(&["analyze-queue", "--table", "6", "--full-precision"]);
    assert!(o.status.success());
    let e: f64 = column(&stdout(&o), "system_time_ms")[0].parse().unwrap();
    assert!((e - 1000.0 * 150.0 / 426.0).abs() < 1e-9, "{e}");
    assert!(e.to_string().len() > 6);
}

#[test]
fn simulate_is_seeded_and_comparable() {
    let run = |dir: &Path| {
        let o = fogduty(&[
            "simulate",
            "--seed",
            "7",
            "--horizon",
            "500",
            "--compare",
            "--format",
            "json",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(dir.join("simulation.json")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path());
    assert_eq!(first, run(b.path()));
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["horizon_s"], 500.0);
    assert!(a.path().join("comparison.json").is_file());
}

#[test]
fn simulate_csv_to_stdout() {
    let o = fogduty(&["simulate", "--horizon", "50", "--feedback", "0.05", "--ls", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("metric,value\n"));
    assert!(out.contains("feedback_fraction,0.05\n"));
    let bad = fogduty(&["simulate", "--horizon", "-1"]);
    assert!(!bad.status.success());
}
