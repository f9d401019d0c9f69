use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: [&str; 4] = ["--mesh", "3,7,15", "--modes", "32"];

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schrod-spde"))
        .current_dir(dir)
        .env("SCHROD_SPDE_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    let (schema, rest) = text.split_once('\n').unwrap();
    assert_eq!(schema, "# schema=1");
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    rdr.records().map(|r| r.unwrap()).collect()
}

fn column(rows: &[csv::StringRecord], i: usize) -> Vec<String> {
    rows.iter().map(|r| r[i].to_string()).collect()
}

/// Ordinary least squares of `ln |e|` on `ln h`.
fn log_log_slope(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.abs().ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "theta = 0.5\nrho = 0.8\nseed = 7\n").unwrap();
    let out = run(dir.path(), &[&["exact-strong", "--config", "run.conf", "--theta", "1", "--rho", "1.3"], &SMALL[..]].concat());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# theta = 1\n"), "{text}");
    assert!(text.contains("# rho = 1.3\n"), "{text}");
    assert!(text.contains("# seed = 7\n"), "{text}");
    let rows = csv_rows(&dir.path().join("results.csv"));
    assert!(column(&rows, 3).iter().all(|t| t == "1.0"));
}

#[test]
fn invalid_values_are_rejected_with_the_key_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &[&["exact-weak", "--theta", "1.5"], &SMALL[..]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("theta") && stderr(&out).contains("[0, 1]"), "{}", stderr(&out));

    let out = run(dir.path(), &[&["exact-weak", "--mesh", "15,7"], &SMALL[2..]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mesh"), "{}", stderr(&out));

    std::fs::write(dir.path().join("bad.conf"), "# header\ncolour = red\n").unwrap();
    let out = run(dir.path(), &["exact-weak", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.conf:2") && stderr(&out).contains("colour"), "{}", stderr(&out));
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| [&["mc-crosscheck", "--samples", "64", "--steps", "16", "--out", out], &SMALL[..]].concat();
    for name in ["a.csv", "b.csv"] {
        let out = run(dir.path(), &args(name));
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let rows = csv_rows(&dir.path().join("a.csv"));
    assert_eq!(rows.len(), 3);
    assert!(column(&rows, 6).iter().all(|v| !v.is_empty()), "strong_mc filled");
    assert!(column(&rows, 12).iter().all(|v| v.is_empty()), "seconds empty without --timing");
    let summary = json(&dir.path().join("a.json"));
    assert_eq!(summary["crosscheck"].as_array().unwrap().len(), 3);
}

#[test]
fn json_fits_match_a_refit_of_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &[&["rates", "--steps", "16"], &SMALL[..]].concat());
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", stderr(&out));
    assert!(stdout(&out).contains("squared-norm identity"));
    let rows = csv_rows(&dir.path().join("results.csv"));
    let h: Vec<f64> = column(&rows, 0).iter().map(|v| v.parse().unwrap()).collect();
    let summary = json(&dir.path().join("results.json"));
    assert_eq!(summary["schema"], 1);
    assert_eq!(summary["mode"], "rates");
    assert_eq!(summary["rows"], 3);
    for (name, idx) in [("strong_exact", 5), ("weak_exact", 8), ("det_error", 11)] {
        let e: Vec<f64> = column(&rows, idx).iter().map(|v| v.parse().unwrap()).collect();
        let slope = summary["fits"][name]["slope"].as_f64().unwrap_or_else(|| panic!("{name}: {}", summary["fits"]));
        assert!((slope - log_log_slope(&h, &e)).abs() < 1e-12, "{name}");
    }
    let gates = summary["gates"].as_array().unwrap();
    assert!(gates.iter().any(|g| g["name"] == "strong error monotone in N"));
    assert_eq!(summary["passed"].as_bool(), Some(gates.iter().all(|g| g["passed"] == true)));
    assert_eq!(out.status.code() == Some(0), summary["passed"] == true);
    assert!(summary["k_check"]["history"].as_array().unwrap().len() >= 2);
}

#[test]
fn deterministic_mode_leaves_stochastic_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &[&["deterministic", "--timing"], &SMALL[..]].concat());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&dir.path().join("results.csv"));
    for i in 5..=10 {
        assert!(column(&rows, i).iter().all(|v| v.is_empty()), "column {i}");
    }
    assert!(column(&rows, 11).iter().all(|v| v.parse::<f64>().unwrap() > 0.0));
    assert!(column(&rows, 12).iter().all(|v| v.parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["selftest"]);
    assert!(out.status.success(), "{}\n{}", stdout(&out), stderr(&out));
    assert!(!stdout(&out).contains("FAIL"));
    let summary = json(&dir.path().join("results.json"));
    assert_eq!(summary["passed"], true);
    assert!(summary["gates"].as_array().unwrap().len() > 10);
}
