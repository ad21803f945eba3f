use std::path::PathBuf;
use std::process::{Command, Output};

fn germ(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../germs").join(name).to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_germflow")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn missing_spec_exits_2() {
    let out = run(&["flow", "--spec", "missing.germ"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.germ"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["check-kuo"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["check-kuo", "--spec", &germ("pitchfork.germ"), "--samples", "0"]).status.code(), Some(2));
    assert_eq!(run(&["check-nd", "--spec", &germ("pitchfork.germ")]).status.code(), Some(2));
    assert_eq!(run(&["verify-equivalence", "--spec", &germ("pitchfork.germ")]).status.code(), Some(2));
}

#[test]
fn malformed_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.germ");
    std::fs::write(&path, "dims 1 1 1\ngroup source 0.9\ngroup target 1\nmap 1 1 3 0\n").unwrap();
    let out = run(&["check-kuo", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-orthogonal generator"));
}

#[test]
fn report_has_stable_top_level_keys() {
    let out = run(&["check-kuo", "--spec", &germ("pitchfork.germ"), "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(keys, ["certificates", "job", "timing", "verdicts", "witnesses"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let pos: Vec<usize> =
        ["\"job\"", "\"verdicts\"", "\"certificates\"", "\"witnesses\"", "\"timing\""].iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert!(v["timing"]["kuo"].as_f64().is_some());
    assert_eq!(v["verdicts"]["kuo"]["verdict"], "holds-empirically");
    assert!(v["verdicts"]["kuo"]["margin"].as_f64().unwrap() >= 1.0);
}

#[test]
fn omit_timing_nulls_the_field() {
    let out = run(&["check-kuo", "--spec", &germ("pitchfork.germ"), "--samples", "500", "--omit-timing"]);
    assert!(json(&out)["timing"].is_null());
}

#[test]
fn failing_verdicts_carry_witnesses() {
    let out = run(&["check-rank", "--spec", &germ("pitchfork.germ"), "--samples", "200"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["verdicts"]["rank"]["verdict"], "fails-with-witness");
    let w = v["witnesses"]["rank"].as_array().unwrap();
    let (x, lam) = (w[0].as_f64().unwrap(), w[1].as_f64().unwrap());
    assert!((3.0 * x * x - lam).abs() < 1e-8);
}

#[test]
fn thread_cap_does_not_change_results() {
    let args = ["check-kuo", "--spec", &germ("pitchfork.germ"), "--samples", "3000", "--omit-timing"];
    let one = Command::new(env!("CARGO_BIN_EXE_germflow")).args(args).env("GERMFLOW_THREADS", "1").output().unwrap();
    let many = run(&args);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn flow_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let out = run(&[
        "flow",
        "--spec",
        &germ("pitchfork.germ"),
        "--pert",
        &germ("x5.germ"),
        "--u0",
        "0.2,0.04",
        "--trace-dir",
        traces.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["certificates"]["flow"]["final_residual"].as_f64().unwrap() <= 1e-6);
    let csv = std::fs::read_to_string(traces.join("trace_0000.csv")).unwrap();
    assert!(csv.starts_with("s,t,u1,u2,d_omega,"));
    assert!(csv.lines().count() > 2);
}

#[test]
fn zero_perturbation_overlay_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.germ");
    std::fs::write(&zero, "dims 1 1 1\n").unwrap();
    let plots = dir.path().join("plots");
    let out = run(&[
        "verify-equivalence",
        "--spec",
        &germ("pitchfork.germ"),
        "--pert",
        zero.to_str().unwrap(),
        "--samples",
        "2000",
        "--seeds",
        "40",
        "--contact-samples",
        "40",
        "--plot-dir",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let mut rdr = csv::Reader::from_path(plots.join("zero_set_overlay.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[1], rec[3]);
        assert_eq!(rec[2], rec[4]);
        rows += 1;
    }
    assert_eq!(rows, 40);
}

#[test]
fn pitchfork_overlay_pairs_zero_sets() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify-equivalence",
        "--spec",
        &germ("pitchfork.germ"),
        "--pert",
        &germ("x5.germ"),
        "--samples",
        "2000",
        "--seeds",
        "60",
        "--contact-samples",
        "30",
        "--plot-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("zero_set_overlay.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let residual: f64 = rec[5].parse().unwrap();
        assert!(residual <= 1e-6);
        // λ is carried along unchanged
        assert_eq!(rec[2], rec[4]);
    }
}

#[test]
fn lemma_checks_pass_for_the_pitchfork() {
    let out = run(&["verify-lemmas", "--spec", &germ("pitchfork.germ"), "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn nd_for_the_linear_germ() {
    let out = run(&["check-nd", "--spec", &germ("linear.germ"), "--nu", "1", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdicts"]["nd-kuo-bridge"]["verdict"], "holds-empirically");
}

#[test]
fn perturbation_check_with_target() {
    let ok = run(&["check-perturbation", "--spec", &germ("pitchfork.germ"), "--target", &germ("pitchfork_x5.germ")]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["certificates"]["jets"]["k"], 4);
    let bad = run(&["check-perturbation", "--spec", &germ("pitchfork.germ"), "--target", &germ("pitchfork_x4.germ")]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(json(&bad)["verdicts"]["perturbation-order"]["message"], "perturbation order 4 ≤ 4");
}
