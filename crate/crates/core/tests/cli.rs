//! End-to-end runs of the `td` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn td(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_td"));
    cmd.args(args).env_remove("TD_THREADS");
    if let Some(n) = threads {
        cmd.env("TD_THREADS", n);
    }
    cmd.output().expect("spawn td")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_and_render_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let csv = dir.path().join(format!("grid{k}.csv"));
        let svg = dir.path().join(format!("sigma{k}.svg"));
        let o = td(&["eval", "--gamma", "2", "--grid", "24", "--out", s(&csv)], threads);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let o = td(&["render", "--grid-csv", s(&csv), "--out", s(&svg)], threads);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let side = fs::read(dir.path().join(format!("grid{k}.csv.json"))).unwrap();
        outputs.push((fs::read(&csv).unwrap(), side, fs::read(&svg).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let (csv, side, svg) = &outputs[0];
    let text = String::from_utf8_lossy(csv);
    assert_eq!(text.lines().next().unwrap(), "x1,x2,t,a,sigma,du,dsdx2");
    assert_eq!(text.lines().count(), 1 + 24 * 24);
    let meta: serde_json::Value = serde_json::from_slice(side).unwrap();
    assert_eq!(meta["rows"], 576);
    assert!(String::from_utf8_lossy(svg).starts_with("<svg"));
}

#[test]
fn experiment_spec_reproduces_the_direct_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let direct = dir.path().join("direct.json");
    let via_spec = dir.path().join("spec.json");
    let o = td(
        &["holder", "--gamma", "1", "--eps-min", "1e-5", "--eps-max", "1e-3", "--points", "10", "--out", s(&direct)],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let spec = dir.path().join("experiment.json");
    let body = serde_json::json!({
        "command": "holder",
        "params": {"gamma": 1, "eps_min": 1e-5, "eps_max": 1e-3, "points": 10, "out": s(&via_spec)}
    });
    fs::write(&spec, body.to_string()).unwrap();
    let o = td(&["--config", s(&spec)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&direct).unwrap(), fs::read(&via_spec).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&direct).unwrap()).unwrap();
    assert_eq!(report["command"], "holder");
    assert_eq!(report["config"]["gamma"], 1.0);
}

#[test]
fn exit_codes_follow_the_documented_table() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = dir.path().join("x.svg");
    assert_eq!(code(&td(&["eval", "--grid", "4", "--out", "g.csv"], None)), 64);
    assert_eq!(code(&td(&["eval", "--gamma", "-1", "--grid", "4", "--out", s(&out)], None)), 64);
    assert_eq!(code(&td(&["render", "--grid-csv", s(&missing), "--out", s(&out)], None)), 74);
    assert_eq!(code(&td(&["--config", s(&missing)], None)), 74);
    assert_eq!(code(&td(&["verify", "weak", "--gamma", "1"], Some("0"))), 64);
    assert_eq!(code(&td(&[], None)), 64);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x1,x2\n0,0\n").unwrap();
    assert_eq!(code(&td(&["render", "--grid-csv", s(&bad), "--out", s(&out)], None)), 1);
    assert!(!out.exists());
}

#[test]
fn weak_verification_passes_and_reports_checks() {
    let o = td(&["verify", "weak", "--gamma", "1"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["result"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!(!v["result"]["certificate"]["residuals"].as_array().unwrap().is_empty());
}
