use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BM_PEN: &str = r#""penalization": {"a": 0, "b": 1, "lambda_a": 1, "lambda_b": 1, "gamma": 0}"#;

fn lpen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run_to_file(dir: &TempDir, sub: &str, body: &str, extra: &[&str]) -> (Output, String) {
    let cfg = write_config(dir, &format!("{sub}.json"), body);
    let out = dir.path().join(format!("{sub}.out"));
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = lpen(&args);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (o, text)
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn h_table_bm_grid() {
    let dir = TempDir::new().unwrap();
    let (o, text) = run_to_file(&dir, "h-table", r#"{"command": {"grid": [-2, -1, 0, 1, 2]}}"#, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(text.starts_with("x,h,h_gamma,err_estimate\n"));
    let h = column(&text, "h");
    for (v, e) in h.iter().zip([2.0, 1.0, 0.0, 1.0, 2.0]) {
        assert!((v - e).abs() < 1e-8, "{v} vs {e}");
    }
}

#[test]
fn h_table_empty_grid_has_header_only() {
    let dir = TempDir::new().unwrap();
    let (o, text) = run_to_file(&dir, "h-table", r#"{"command": {"grid": []}}"#, &[]);
    assert!(o.status.success());
    assert_eq!(text, "x,h,h_gamma,err_estimate\n");
}

#[test]
fn h_table_stable_scaling() {
    let dir = TempDir::new().unwrap();
    let body = r#"{"model": {"kind": "stable", "alpha": 1.5}, "command": {"grid": [1, 4]}}"#;
    let (o, text) = run_to_file(&dir, "h-table", body, &[]);
    assert!(o.status.success());
    let h = column(&text, "h");
    assert!((h[1] / h[0] - 2.0).abs() < 1e-6);
}

#[test]
fn numbers_have_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let (_, text) = run_to_file(&dir, "h-table", r#"{"command": {"grid": [0.1]}}"#, &[]);
    let line = text.lines().nth(1).unwrap();
    assert!(line.starts_with("1.0000000000000001e-1,"), "{line}");
}

#[test]
fn phi_values_and_residual() {
    let dir = TempDir::new().unwrap();
    let body = format!(r#"{{{BM_PEN}, "command": {{"grid": [-1, 0, 0.5, 2, 3.5]}}}}"#);
    let (o, text) = run_to_file(&dir, "phi", &body, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(column(&text, "affine_residual").iter().all(|r| r.abs() < 1e-10));
    assert!((column(&text, "phi_gamma")[1] - 0.5).abs() < 1e-8);
}

#[test]
fn phi_swap_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let grid = r#""command": {"grid": [-1.5, 0.25, 0.8, 4]}"#;
    let a = format!(r#"{{"penalization": {{"a": -0.5, "b": 1, "lambda_a": 0.7, "lambda_b": 2, "gamma": 0.3}}, {grid}}}"#);
    let b = format!(r#"{{"penalization": {{"a": 1, "b": -0.5, "lambda_a": 2, "lambda_b": 0.7, "gamma": 0.3}}, {grid}}}"#);
    let (_, ta) = run_to_file(&dir, "phi", &a, &[]);
    let (_, tb) = run_to_file(&TempDir::new().unwrap(), "phi", &b, &[]);
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
}

#[test]
fn expect_with_simulation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        r#"{{{BM_PEN}, "command": {{"clock": {{"kind": "hitting", "c": 3}}, "grid": [0.5],
            "simulate": true, "mc": {{"n_paths": 400}}}}, "seed": 11}}"#
    );
    let (o1, t1) = run_to_file(&dir, "expect", &body, &[]);
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    let (_, t2) = run_to_file(&dir, "expect", &body, &["--threads", "1"]);
    assert_eq!(t1, t2);
    let (_, t3) = run_to_file(&dir, "expect", &body, &["--seed", "12"]);
    assert_ne!(t1, t3);
    let exact = column(&t1, "exact")[0];
    let mean = column(&t1, "mc_mean")[0];
    let se = column(&t1, "mc_std_err")[0];
    assert!((mean - exact).abs() < 4.0 * se);
}

#[test]
fn expect_json_records() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        r#"{{{BM_PEN}, "command": {{"clock": {{"kind": "two_point", "c": 2, "d": 2}}, "grid": [0.5, -0.5],
            "format": "json"}}}}"#
    );
    let (o, text) = run_to_file(&dir, "expect", &body, &[]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let recs = v.as_array().unwrap();
    assert_eq!(recs.len(), 2);
    let r = &recs[0];
    let total = r["exact"].as_f64().unwrap();
    let c = r["diagnostics"]["restricted_c"].as_f64().unwrap();
    let d = r["diagnostics"]["restricted_d"].as_f64().unwrap();
    assert!((c + d - total).abs() < 1e-12);
    assert!(r["estimate"].is_null());
    assert_eq!(r["config"]["clock"]["kind"], "two_point");
}

#[test]
fn limit_sweep_hitting_and_two_point() {
    let dir = TempDir::new().unwrap();
    let body = format!(r#"{{{BM_PEN}, "command": {{"sweep": {{"kind": "hitting", "ladder": [4, 8, 16, 32]}}}}}}"#);
    let (o, text) = run_to_file(&dir, "limit-sweep", &body, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let gaps = column(&text, "abs_gap");
    assert_eq!(gaps.len(), 4);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));

    let body = format!(
        r#"{{{BM_PEN}, "command": {{"sweep": {{"kind": "two_point", "ladder": [2, 4, 8], "ratio": 1}}}}}}"#
    );
    let (_, text) = run_to_file(&dir, "limit-sweep", &body, &[]);
    let g = column(&text, "gamma");
    assert_eq!(g.len(), 9);
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn limit_sweep_inverse_lt_final_gap() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        r#"{{{BM_PEN}, "command": {{"sweep": {{"kind": "inverse_local_time", "ladder": [4, 8, 16, 32], "u": 1}}}}}}"#
    );
    let (o, text) = run_to_file(&dir, "limit-sweep", &body, &[]);
    assert!(o.status.success());
    assert!(*column(&text, "rel_gap").last().unwrap() < 0.02);
}

#[test]
fn verify_subset_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (o, text) = run_to_file(&dir, "verify", r#"{"command": {"criteria": [1, 3]}}"#, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);

    let broken = r#"{"command": {"criteria": [1], "tolerances": {"quadrature_abs": 1e-30}}}"#;
    let (o, text) = run_to_file(&dir, "verify", broken, &[]);
    assert_eq!(o.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn verify_reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let body = r#"{"command": {"criteria": [5, 8], "scale": 0.005}, "seed": 5}"#;
    let cfg = write_config(&dir, "v.json", body);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let c = cfg.to_str().unwrap();
    assert!(lpen(&["verify", "--config", c, "--out", a.to_str().unwrap(), "--threads", "1"]).status.code().is_some());
    assert!(lpen(&["verify", "--config", c, "--out", b.to_str().unwrap(), "--threads", "8"]).status.code().is_some());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = lpen(&["h-table", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let cases = [
        ("phi", r#"{"command": {"grid": [0]}}"#),
        ("h-table", r#"{"model": {"kind": "stable", "alpha": 0.8}}"#),
        ("h-table", r#"{"colour": "blue"}"#),
        ("expect", &format!(r#"{{{BM_PEN}, "command": {{"clock": {{"kind": "hitting", "c": 1}}, "grid": [0.5]}}}}"#)),
        ("limit-sweep", &format!(r#"{{{BM_PEN}, "command": {{"sweep": {{"kind": "hitting", "ladder": [8, 4]}}}}}}"#)),
        ("verify", r#"{"command": {"criteria": [12]}}"#),
    ];
    for (sub, body) in cases {
        let (o, _) = run_to_file(&dir, sub, body, &[]);
        assert_eq!(o.status.code(), Some(2), "{sub} {body}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(lpen(&["h-table", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(lpen(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let body = r#"{"command": {"grid": [1], "extrapolation": {"steps": 3, "stop_tol": 1e-300}}}"#;
    let (o, _) = run_to_file(&dir, "h-table", body, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_documents_flags() {
    for sub in ["h-table", "phi", "expect", "limit-sweep", "verify"] {
        let o = lpen(&[sub, "--help"]);
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in ["--config", "--seed", "--threads", "--out"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
    }
}
