use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn collox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collox"))
        .args(args)
        .output()
        .expect("run collox")
}

fn collox_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collox"))
        .args(args)
        .env(key, val)
        .output()
        .expect("run collox")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn sweep_rows(dir: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(dir.join("sweep.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

/// Rows with the wall-clock column dropped.
fn stable_rows(dir: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    let wall = reader.headers().unwrap().iter().position(|h| h == "wall_seconds").unwrap();
    reader
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != wall)
                .map(|(_, s)| s.to_string())
                .collect()
        })
        .collect()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

#[test]
fn preset_single_run_converges_quickly() {
    let tmp = TempDir::new().unwrap();
    let out = path(&tmp, "run");
    let o = collox(&["solve", "--preset", "table3.2:mu=0.05,l=20", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(Path::new(&out));
    assert_eq!(r["converged"], Value::Bool(true));
    assert!(r["N"].as_u64().unwrap() <= 18, "{r}");
    for key in [
        "mu",
        "k",
        "l",
        "w",
        "method",
        "N",
        "iterations_per_segment",
        "converged",
        "wall_seconds",
        "flop_estimate",
        "err_inf",
    ] {
        assert!(r.get(key).is_some(), "report.json lacks {key}");
    }
    assert!(Path::new(&out).join("phase.csv").exists());
}

#[test]
fn zero_w_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = collox(&["solve", "--method", "segmented", "--w", "0", "--out", &path(&tmp, "x")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("w must divide l"), "{}", stderr(&o));
}

#[test]
fn solution_csv_covers_the_sampling_grid() {
    let tmp = TempDir::new().unwrap();
    let out = path(&tmp, "mu1");
    let o = collox(&["solve", "--mu", "1", "--k", "5", "--l", "80", "--range", "0", "40", "--out", &out]);
    // the whole-range linearisation of mu = 1 on [0, 40] overflows, which is
    // reported but still leaves the sampled artifacts
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(Path::new(&out).join("solution.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["x", "f", "df", "d2f", "err"]);
    assert_eq!(reader.records().count(), 80 * 17 + 1);
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"mu": 0.5, "tolerance": 1e-6}"#).unwrap();
    let o = collox(&["solve", "--config", cfg.to_str().unwrap(), "--out", &path(&tmp, "x")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"mu": 0.5, "k": 6, "l": 40, "range": [0, 10]}"#).unwrap();
    let out = path(&tmp, "run");
    let o = collox(&["solve", "--config", cfg.to_str().unwrap(), "--l", "20", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(Path::new(&out));
    assert_eq!(r["k"], 6);
    assert_eq!(r["l"], 20);
    assert_eq!(r["mu"], 0.5);
    assert_eq!(r["b"], 10.0);
}

#[test]
fn segmented_sweep_errors_agree() {
    let tmp = TempDir::new().unwrap();
    let out = path(&tmp, "sweep");
    let o = collox(&["sweep", "--preset", "table5.2", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = sweep_rows(Path::new(&out));
    assert_eq!(rows.len(), 8);
    let errs: Vec<f64> = rows.iter().map(|r| r[14].parse().unwrap()).collect();
    let lo = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = errs.iter().cloned().fold(0.0, f64::max);
    assert!((hi - lo) / lo <= 0.05, "{errs:?}");
}

#[test]
fn single_sweep_matches_solve() {
    let tmp = TempDir::new().unwrap();
    let args = ["--mu", "2", "--k", "5", "--l", "40", "--w", "4", "--method", "segmented", "--range", "0", "10"];
    let solve_out = path(&tmp, "solve");
    let sweep_out = path(&tmp, "sweep");
    let o = collox(&[&["solve", "--out", solve_out.as_str()][..], &args[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = collox(&[&["sweep", "--out", sweep_out.as_str()][..], &args[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(Path::new(&solve_out));
    let rows = sweep_rows(Path::new(&sweep_out));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][8].parse::<u64>().unwrap(), r["N"].as_u64().unwrap());
    assert_eq!(rows[0][14].parse::<f64>().unwrap(), r["err_inf"].as_f64().unwrap());
    let segments: Vec<String> = r["iterations_per_segment"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.to_string())
        .collect();
    assert_eq!(rows[0][9], segments.join(";"));
}

#[test]
fn sweeps_are_deterministic_across_order_and_threads() {
    let tmp = TempDir::new().unwrap();
    let args = ["--preset", "table3.2:l=10|20,mu=0.05|0.25|0.5,range=0|10", "--out"];
    let plain = path(&tmp, "plain");
    let o = collox(&[&["sweep"][..], &args[..], &[plain.as_str()][..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let shuffled = path(&tmp, "shuffled");
    let o = collox_env(
        &[&["sweep", "--jobs", "3"][..], &args[..], &[shuffled.as_str()][..]].concat(),
        "COLLOX_SEED",
        "17",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let a = stable_rows(Path::new(&plain));
    assert_eq!(a.len(), 6);
    assert_eq!(a, stable_rows(Path::new(&shuffled)));
}

#[test]
fn sweep_skips_misfit_w() {
    let tmp = TempDir::new().unwrap();
    let out = path(&tmp, "s");
    let o = collox(&[
        "sweep", "--method", "segmented", "--mu", "1", "--l", "20", "--w", "3,4", "--range", "0", "5", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipped 1"), "{}", stderr(&o));
    assert_eq!(sweep_rows(Path::new(&out)).len(), 1);
}

fn write_rows(dir: &TempDir, name: &str, rows: &[(f64, usize, usize, f64, f64)]) -> String {
    // (mu, l, w, N, wall)
    let file = dir.path().join(name);
    let mut w = csv::Writer::from_path(&file).unwrap();
    w.write_record([
        "problem", "mu", "k", "l", "w", "method", "a", "b", "N", "iterations_per_segment", "converged",
        "wall_seconds", "flop_estimate", "counted_flops", "err_inf", "failure",
    ])
    .unwrap();
    for &(mu, l, ww, n, wall) in rows {
        let n = n.round() as usize;
        w.write_record([
            "vdp".to_string(),
            mu.to_string(),
            "5".into(),
            l.to_string(),
            ww.to_string(),
            "segmented".into(),
            "0".into(),
            "40".into(),
            n.to_string(),
            n.to_string(),
            "true".into(),
            wall.to_string(),
            "1".into(),
            "1".into(),
            "0.5".into(),
            "".into(),
        ])
        .unwrap();
    }
    w.flush().unwrap();
    file.display().to_string()
}

fn analyze(args: &[&str]) -> (Option<i32>, Value, String) {
    let o = collox(&[&["analyze"][..], args].concat());
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (o.status.code(), v, stderr(&o))
}

#[test]
fn iteration_model_on_synthetic_counts() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<_> = [2usize, 4, 5, 8, 10, 16, 20, 40, 80]
        .iter()
        .map(|&w| (3.0, 160, w, 1000.0 / w as f64 + 2.0 * w as f64, 1.0))
        .collect();
    let file = write_rows(&tmp, "model.csv", &rows);
    let (code, v, err) = analyze(&[&file, "--kind", "iteration-model", "--n-ori", "1000"]);
    assert_eq!(code, Some(0), "{err}");
    let lambda = v["model"]["lambda"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&lambda), "{v}");
}

#[test]
fn mu_cost_recovers_power_law() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<_> = [0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&mu: &f64| (mu, 160, 1, 5.0, 0.3 * mu.powf(1.5)))
        .collect();
    let file = write_rows(&tmp, "cost.csv", &rows);
    let (code, v, err) = analyze(&[&file, "--kind", "mu-cost"]);
    assert_eq!(code, Some(0), "{err}");
    assert!((v["exponent"].as_f64().unwrap() - 1.5).abs() < 1e-10, "{v}");
    assert!((v["prefactor"].as_f64().unwrap() - 0.3).abs() < 1e-10, "{v}");
}

#[test]
fn harmonic_order_fit() {
    let tmp = TempDir::new().unwrap();
    let out = path(&tmp, "h");
    let o = collox(&[
        "sweep", "--problem", "harmonic", "--k", "4,5,6", "--l", "10,20,40", "--range", "0", "4", "--tol", "1e-10",
        "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Path::new(&out).join("sweep.csv").display().to_string();
    let (code, v, err) = analyze(&[&csv, "--kind", "order"]);
    assert_eq!(code, Some(0), "{err}");
    for row in v["orders"].as_array().unwrap() {
        let k = row["k"].as_f64().unwrap();
        let order = row["order"].as_f64().unwrap();
        assert!(order >= k - 2.0 - 0.1, "{row}");
    }
}

#[test]
fn rows_round_trip_through_json() {
    let tmp = TempDir::new().unwrap();
    let out = path(&tmp, "sw");
    let o = collox(&["sweep", "--preset", "table3.2:l=10,mu=0.05|0.5,range=0|10", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Path::new(&out).join("sweep.csv").display().to_string();
    let json = path(&tmp, "rows.json");
    let (code, _, err) = analyze(&[&csv, "--kind", "rows", "--out", &json]);
    assert_eq!(code, Some(0), "{err}");
    let (code, v, err) = analyze(&[&json, "--kind", "rows"]);
    assert_eq!(code, Some(0), "{err}");
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["mu"], 0.5);
}

#[test]
fn too_few_rows_is_an_analysis_error() {
    let tmp = TempDir::new().unwrap();
    let file = write_rows(&tmp, "two.csv", &[(1.0, 160, 1, 5.0, 1.0), (2.0, 160, 1, 6.0, 2.0)]);
    let (code, _, err) = analyze(&[&file, "--kind", "mu-cost"]);
    assert_eq!(code, Some(2), "{err}");
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(collox(&["--help"]).status.code(), Some(0));
    assert_eq!(collox(&["solve", "--bogus"]).status.code(), Some(1));
    let o = collox(&["presets"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("table5.2"));
}
