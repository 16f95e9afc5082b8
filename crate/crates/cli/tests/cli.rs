use std::path::Path;
use std::process::{Command, Output};

fn conjset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conjset")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn prescribe_mixed_set_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = conjset(&["prescribe", "--interval", "0", "2.5", "--set", "1.0;1.5:2.0", "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = report(&out);
    assert_eq!(s["instants"].as_array().unwrap().len(), 1);
    assert_eq!(s["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(s["abstract_index"]["index"], 1);
    for f in ["system.json", "morse_sturm.json", "metric.json", "report.json", "trace.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }

    // detection on the written Morse–Sturm file reproduces the embedded report
    let again = dir.path().join("again.json");
    let ms = run.join("morse_sturm.json");
    let d = conjset(&["detect", "--in", ms.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(d.status.code(), Some(0));
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(run.join("report.json")).unwrap());

    let g = conjset(&["verify-geometry", "--in", run.join("metric.json").to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0));
    assert_eq!(report(&g)["index_of_metric"], 1);

    let t = conjset(&["metric", "--in", ms.to_str().unwrap(), "--causal", "timelike"]);
    assert_eq!(t.status.code(), Some(0));
    let metric_path = write(dir.path(), "timelike.json", std::str::from_utf8(&t.stdout).unwrap());
    let g = conjset(&["verify-geometry", "--in", &metric_path]);
    assert_eq!(report(&g)["index_of_metric"], 2);
}

#[test]
fn prescribe_empty_set() {
    let out = conjset(&["prescribe", "--interval", "0", "1", "--set", ""]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = report(&out);
    assert!(s["instants"].as_array().unwrap().is_empty());
    assert!(s["clusters"].as_array().unwrap().is_empty());
}

#[test]
fn prescribe_rejects_bad_input() {
    // F must lie in ]a, b]
    assert_eq!(conjset(&["prescribe", "--interval", "0", "1", "--set", "0.0"]).status.code(), Some(2));
    assert_eq!(conjset(&["prescribe", "--interval", "0", "1", "--set", "0.5;x"]).status.code(), Some(2));
    assert_eq!(conjset(&["prescribe", "--interval", "1", "0", "--set", ""]).status.code(), Some(2));
    assert_eq!(conjset(&["prescribe", "--interval", "0", "1", "--set", "0.5", "--grid", "32"]).status.code(), Some(2));
    assert_eq!(conjset(&["prescribe", "--interval", "0", "1", "--set", "0.5", "--tol-zero", "-1"]).status.code(), Some(2));
    assert_eq!(conjset(&["prescribe", "--set", "0.5"]).status.code(), Some(2));
}

#[test]
fn detect_named_systems() {
    let dir = tempfile::tempdir().unwrap();
    let osc = write(
        dir.path(),
        "osc.json",
        r#"{"n": 1, "a": 0.0, "b": 3.5, "grid_N": 4096, "coeff": {"kind": "analytic-id", "id": "oscillator"}}"#,
    );
    let out = conjset(&["detect", "--in", &osc]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let instants = r["instants"].as_array().unwrap();
    assert_eq!(instants.len(), 1);
    assert!((instants[0]["t"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-6);
    assert_eq!(instants[0]["multiplicity"], 1);

    let flat = write(
        dir.path(),
        "flat.json",
        r#"{"n": 1, "a": 0.0, "b": 2.0, "grid_N": 64, "coeff": {"kind": "analytic-id", "id": "flat"}}"#,
    );
    let out = conjset(&["detect", "--in", &flat]);
    assert!(report(&out)["instants"].as_array().unwrap().is_empty());

    let trace = conjset(&["trace", "--in", &flat]);
    let text = String::from_utf8(trace.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "t,d");
    assert_eq!(rows.len(), 66);
    for row in &rows[1..] {
        let (t, d) = row.split_once(',').unwrap();
        let (t, d): (f64, f64) = (t.parse().unwrap(), d.parse().unwrap());
        assert!((t - d).abs() < 1e-10);
    }

    // the oscillator is already in Morse–Sturm form; reduce and metric still work
    let red = conjset(&["reduce", "--in", &osc]);
    assert_eq!(red.status.code(), Some(0));
    assert!(report(&red)["a_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let osc = write(
        dir.path(),
        "osc.json",
        r#"{"n": 1, "a": 0.0, "b": 7.0, "grid_N": 512, "coeff": {"kind": "analytic-id", "id": "oscillator", "params": {"omega": 1.5}}}"#,
    );
    let a = conjset(&["detect", "--in", &osc]);
    let b = conjset(&["detect", "--in", &osc]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a)["instants"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_files_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"n": 1}"#);
    assert_eq!(conjset(&["detect", "--in", &bad]).status.code(), Some(2));
    assert_eq!(conjset(&["detect", "--in", "/nonexistent/file.json"]).status.code(), Some(2));
    let asym = write(
        dir.path(),
        "asym.json",
        r#"{"n": 2, "a": 0.0, "b": 1.0, "grid_N": 1, "coeff": {"kind": "sampled", "times": [0.0, 0.5, 1.0],
            "samples": {"A": [[0,0,0,0],[0,0,0,0],[0,0,0,0]], "B": [[1,0,1,1],[1,0,1,1],[1,0,1,1]], "C": [[0,0,0,0],[0,0,0,0],[0,0,0,0]]}}}"#,
    );
    assert_eq!(conjset(&["detect", "--in", &asym]).status.code(), Some(2));
    assert_eq!(conjset(&["verify-geometry", "--in", &bad]).status.code(), Some(2));
    assert_eq!(conjset(&["frobnicate"]).status.code(), Some(2));
}
