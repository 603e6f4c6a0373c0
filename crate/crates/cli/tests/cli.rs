use std::path::Path;
use std::process::{Command, Output};

fn mckean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mckean"))
        .args(args)
        .env("MCKEAN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Columns of a CSV trace, by header name.
fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn free_rho_trace_touches_zero_at_doubles() {
    let o = mckean(&["trace", "--what", "rho", "--from", "1", "--to", "500", "--points", "1000"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let (l, f, fi) = (column(&csv, "lambda_re"), column(&csv, "f_re"), column(&csv, "f_im"));
    assert_eq!(l.len(), 1000);
    assert!(f.iter().all(|&v| v <= 0.0) && fi.iter().all(|&v| v == 0.0));
    let peaks: Vec<f64> = (1..f.len() - 1).filter(|&k| f[k] > f[k - 1] && f[k] > f[k + 1]).map(|k| l[k]).collect();
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    assert!((peaks[0] - 47.737).abs() < 0.5 && (peaks[1] - 381.90).abs() < 0.5, "{peaks:?}");
}

#[test]
fn free_lyapunov_is_cosine() {
    let o = mckean(&["trace", "--what", "lyapunov", "--from", "1", "--to", "60", "--points", "25"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    for (e, d) in column(&csv, "energy_re").iter().zip(column(&csv, "f_re")) {
        assert!((d - e.sqrt().cos()).abs() < 1e-8, "E = {e}");
    }
}

#[test]
fn free_potential_vanishes() {
    let o = mckean(&["trace", "--what", "potential", "--energy", "9"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let v = column(&csv, "v_re").into_iter().chain(column(&csv, "v_im"));
    assert!(v.map(f64::abs).fold(0.0, f64::max) < 1e-8);
}

#[test]
fn monodromy_output_is_deterministic() {
    let a = mckean(&["monodromy", "--lambda", "10,2"]);
    let b = mckean(&["monodromy", "--lambda", "10,2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let json: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let det = &json["det"];
    assert!((det[0].as_f64().unwrap() - 1.0).abs() < 1e-9 && det[1].as_f64().unwrap().abs() < 1e-9);
    assert!(stdout(&a).contains("e+0"));
}

#[test]
fn verify_free_writes_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = mckean(&["verify", "--n-max", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["all_pass"], true);
    assert_eq!(json["residuals"].as_object().unwrap().len(), 12);
}

#[test]
fn failed_identity_exits_two() {
    let o = mckean(&["verify", "--n-max", "1", "--tol-default", "1e-30"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed"));
}

#[test]
fn large_coefficients_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[coefficients]\np = { cos = [5.0] }\n");
    let o = mckean(&["--config", &cfg, "verify"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("smallness threshold"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_max = 1\nbogus = 3\n");
    assert_eq!(mckean(&["--config", &cfg, "verify"]).status.code(), Some(1));
    assert_eq!(mckean(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mckean(&["verify", "--tol-identity", "no_such_identity=1e-3"]).status.code(), Some(1));
}
