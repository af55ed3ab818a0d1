//! End-to-end runs of the `curvlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_curvlab"));
    c.env("CURVLAB_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn curvlab")
}

fn example(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("{name}.json"));
    let mut args = vec!["example", "--name", name, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn report_json(path: &Path) -> Value {
    let o = run(&["report", "--in", path.to_str().unwrap(), "--budget", "40000", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn report_on_named_operators() {
    let dir = tempfile::tempdir().unwrap();
    let s4 = report_json(&example(dir.path(), "section4", &["--n", "4"]));
    assert!((s4["lambda_flag"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
    assert!((s4["lambda_sec"].as_f64().unwrap() - 0.25).abs() <= 1e-6);
    let round = report_json(&example(dir.path(), "round", &["--n", "4"]));
    assert!((round["lambda_flag"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn report_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = example(dir.path(), "section4", &["--n", "4"]);
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = dir.path().join("cut.json");
    std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
    assert_eq!(run(&["report", "--in", cut.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["report", "--in", "/nonexistent/op.json"]).status.code(), Some(2));
    assert_eq!(run(&["report", "--bogus-flag"]).status.code(), Some(2));
}

fn non_bianchi(dir: &Path) -> PathBuf {
    // coupling e₁∧e₂ to e₃∧e₄ alone breaks the first Bianchi identity
    let p = dir.join("bad.json");
    let mut m = vec![vec![0.0f64; 6]; 6];
    m[0][5] = 1.0;
    m[5][0] = 1.0;
    let v = serde_json::json!({"n": 4, "format": "dense-lex", "matrix": m});
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn verify_exit_codes() {
    let o = run(&["verify", "--suite", "polarization_vec,polarization_scalar,sharp_identity,berger,flag_sum", "--n", "4", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let reports: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 5);
    assert!(reports.as_array().unwrap().iter().all(|r| r["pass"] == Value::Bool(true)));

    assert_eq!(run(&["verify", "--suite", "no_such_check"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = non_bianchi(dir.path());
    assert_eq!(run(&["verify", "--suite", "berger", "--in", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["report", "--in", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_bochner_needs_odd_dimension() {
    assert_eq!(run(&["verify", "--suite", "bochner", "--n", "4", "--trials", "5"]).status.code(), Some(2));
    let o = run(&["verify", "--suite", "bochner", "--n", "5", "--trials", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn flow_round_and_blow_up() {
    let dir = tempfile::tempdir().unwrap();
    let round = example(dir.path(), "round", &["--n", "4"]);
    let out = dir.path().join("flow.csv");
    let o = run(&["flow", "--in", round.to_str().unwrap(), "--t-end", "0.1", "--dt", "1e-4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&out);
    let last = rows.last().unwrap();
    // Scal = 12 c(t) with c = 1/(1 − 6t)
    assert!((last[0].parse::<f64>().unwrap() - 0.1).abs() < 1e-9);
    assert!((last[1].parse::<f64>().unwrap() - 30.0).abs() <= 1e-4);

    let o = run(&["flow", "--in", round.to_str().unwrap(), "--t-end", "0.2", "--dt", "1e-4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&out);
    let t_last: f64 = rows.last().unwrap()[0].parse().unwrap();
    assert!((0.16..0.2).contains(&t_last), "{t_last}");
}

#[test]
fn flow_of_zero_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("zero.json");
    std::fs::write(&p, serde_json::json!({"n": 4, "format": "dense-lex", "matrix": vec![vec![0.0; 6]; 6]}).to_string()).unwrap();
    let out = dir.path().join("z.csv");
    let o = run(&["flow", "--in", p.to_str().unwrap(), "--t-end", "0.01", "--dt", "1e-3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn sweep_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["sweep", "--lambda-grid", "", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);

    let o = run(&["sweep", "--n", "3", "--lambda-grid", "0.4", "--trials", "2", "--budget", "5000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[3] == "n/a"));
}

#[test]
fn identical_commands_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["example", "--name", "random_flag_pinched", "--n", "4", "--lambda-target", "0.3", "--seed", "4"]);
    let b = run(&["example", "--name", "random_flag_pinched", "--n", "4", "--lambda-target", "0.3", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
    let op = dir.path().join("op.json");
    std::fs::write(&op, &a.stdout).unwrap();
    let r1 = run(&["report", "--in", op.to_str().unwrap(), "--budget", "20000", "--seed", "3", "--json"]);
    let r2 = bin().env("CURVLAB_THREADS", "2").args(["report", "--in", op.to_str().unwrap(), "--budget", "20000", "--seed", "3", "--json"]).output().unwrap();
    assert_eq!(r1.stdout, r2.stdout);
    let v1 = run(&["verify", "--suite", "berger", "--trials", "50"]);
    let v2 = run(&["verify", "--suite", "berger", "--trials", "50"]);
    assert_eq!(v1.stdout, v2.stdout);
}
