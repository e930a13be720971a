use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use ulcp_core::model::json;
use ulcp_core::program_ir::SdpaProblem;
use ulcp_core::{AffineFamily, Mat, Shift, UncertainLcp, UncertaintySet, Vector};

fn ulcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ulcp"))
        .args(args)
        .env_remove("ULCP_CONFIG")
        .env_remove("ULCP_SDP_SOLVER")
        .output()
        .expect("spawn ulcp")
}

/// `M = I`, `q(u) = (−1, 1) + u (0.5, 0)` over the unit box.
fn write_problem(dir: &Path) -> PathBuf {
    write_family(dir, Mat::identity(2, 2), "problem.json")
}

fn write_family(dir: &Path, m0: Mat, name: &str) -> PathBuf {
    let family = AffineFamily::new(
        m0,
        Vector::from_vec(vec![-1.0, 1.0]),
        vec![Shift {
            m: Mat::zeros(2, 2),
            q: Vector::from_vec(vec![0.5, 0.0]),
        }],
    )
    .unwrap();
    let p = UncertainLcp::new(family, UncertaintySet::BoxInf).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, json::to_string(&p)).unwrap();
    path
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path());
    let out = ulcp(&["solve", prob.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["x"].as_array().unwrap().len() == 2);
    let point = dir.path().join("point.json");
    std::fs::write(&point, &out.stdout).unwrap();
    let ok = ulcp(&["verify", prob.to_str().unwrap(), point.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[0.0, 0.0]").unwrap();
    let fail = ulcp(&["verify", prob.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(fail.status.code(), Some(4));
}

#[test]
fn verify_max_gap() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path());
    let pt = dir.path().join("p.json");
    std::fs::write(&pt, r#"{"x": [3.0, 0.0]}"#).unwrap();
    let args = ["verify", prob.to_str().unwrap(), pt.to_str().unwrap()];
    assert_eq!(ulcp(&args).status.code(), Some(0));
    let mut tight = args.to_vec();
    tight.extend(["--max-gap", "1e-3"]);
    assert_eq!(ulcp(&tight).status.code(), Some(4));
}

#[test]
fn refused_route_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path());
    let out = ulcp(&["build-rc", prob.to_str().unwrap(), "--route", "thm39"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path());
    let cfg = dir.path().join("ulcp.toml");
    std::fs::write(&cfg, "max_iter = 1\n").unwrap();
    let out = ulcp(&["--config", cfg.to_str().unwrap(), "solve", prob.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{}").unwrap();
    assert_eq!(ulcp(&["solve", junk.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(ulcp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ulcp(&["--help"]).status.code(), Some(0));
}

#[test]
fn build_rc_and_sdpa() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path());
    let out = ulcp(&["build-rc", prob.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["route"].is_string());
    assert!(v["program"]["variables"].is_array());
    let linear = write_family(dir.path(), Mat::zeros(2, 2), "linear.json");
    let sdpa = ulcp(&["emit-sdpa", linear.to_str().unwrap()]);
    assert_eq!(sdpa.status.code(), Some(0), "{}", String::from_utf8_lossy(&sdpa.stderr));
    let text = String::from_utf8(sdpa.stdout).unwrap();
    let parsed = SdpaProblem::parse(&text).unwrap();
    assert_eq!(parsed.write(), text);
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = ulcp(&["experiment", "table1", "--sizes", "4,6", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("table1/report.json").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Robust vs non-robust"));
    assert_eq!(ulcp(&["experiment", "table9"]).status.code(), Some(1));
}
