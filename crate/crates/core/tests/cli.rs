use std::path::Path;
use std::process::{Command, Output};

use rsma_aoi::cli::CSV_HEADER;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsma-aoi")).args(args).output().expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

#[test]
fn empty_scheme_list_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none.csv");
    let o = run(&["--experiment", "sweep-power", "--schemes", "", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("scheme list is empty"));
    assert!(!out.exists());
}

#[test]
fn unknown_experiment_and_bad_config_are_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["--experiment", "sweep-doppler", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep-power"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n_antennas": 3}"#).unwrap();
    let o = run(&["--experiment", "sweep-power", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("antennas"));
    assert!(!out.exists());
}

#[test]
fn power_sweep_over_every_scheme_has_sixteen_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("power.csv");
    let o = run(&["--experiment", "sweep-power", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(fields).collect();
    assert_eq!(rows.len(), 16);
    let keys: Vec<(String, f64)> = rows.iter().map(|r| (r[1].to_string(), r[4].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    assert_eq!(keys, sorted);
    for r in &rows {
        assert_eq!(r.len(), 12);
        assert_eq!((r[0], r[2], r[3], r[10]), ("sweep-power", "optimized", "tx_power_dbm", "1"));
        assert!(r[7].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn reruns_overwrite_with_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sdma.csv");
    std::fs::write(&out, "stale contents that must disappear\n".repeat(100)).unwrap();
    let args = |workers: &'static str| {
        vec!["--experiment", "sweep-velocity", "--schemes", "sdma", "--sweep", "100,200", "--workers", workers, "--out", out.to_str().unwrap()]
    };
    assert!(run(&args("1")).status.success());
    let first = std::fs::read(&out).unwrap();
    assert!(!String::from_utf8_lossy(&first).contains("stale"));
    assert!(run(&args("1")).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
    assert!(run(&args("3")).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn config_seed_and_trials_flow_into_the_provenance_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"tx_power_dbm": 30.0, "batch_slots": 500}"#).unwrap();
    let out = dir.path().join("v.csv");
    let raw = dir.path().join("raw.csv");
    let trace = dir.path().join("trace.csv");
    let o = run(&[
        "--experiment",
        "validate-analytic",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--trials",
        "3000",
        "--sweep",
        "200",
        "--raw-trace",
        raw.to_str().unwrap(),
        "--raw-trace-slots",
        "50",
        "--trace-out",
        trace.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(fields).collect();
    assert!(rows.iter().all(|r| r[10] == "9"));
    let mc: Vec<_> = rows.iter().filter(|r| r[2] == "montecarlo").collect();
    let analytic: Vec<_> = rows.iter().filter(|r| r[2] == "analytic").collect();
    // per user: common and overall, plus the two means
    assert_eq!(mc.len(), 10);
    assert_eq!(analytic.len(), 10);
    assert!(mc.iter().all(|r| r[11] == "3000" && !r[9].is_empty()));
    assert!(analytic.iter().all(|r| r[11] == "0" && r[9].is_empty()));

    let raw = read(&raw);
    assert_eq!(raw.lines().next(), Some("slot,user,stream,sinr,success,aoi_s"));
    assert!(raw.lines().count() > 50);
    let trace = read(&trace);
    assert!(trace.starts_with("sweep_param,sweep_value,start,step,iteration,objective,max_constraint_violation\n"));
    assert!(trace.lines().count() > 5);
}

#[test]
fn convergence_rows_follow_the_selected_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let o = run(&["--experiment", "convergence", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    let step1: Vec<f64> = text
        .lines()
        .skip(1)
        .map(fields)
        .filter(|r| r[3] == "iteration_step1")
        .map(|r| r[7].parse().unwrap())
        .collect();
    assert!(step1.len() >= 2);
    assert!(step1.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}
