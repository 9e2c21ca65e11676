use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const TWO_GROUPS: &str = "x,y,label\n0,0,a\n0.5,0.2,a\n1,0.1,a\n5,5,b\n5.5,5.1,b\n6,4.9,b\n";

fn sepscore(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepscore"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEPSCORE_SEED")
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("two.csv"), TWO_GROUPS).unwrap();
    dir
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn score_reports_every_index() {
    let dir = setup();
    let v = json(&sepscore(&["score", "two.csv"], dir.path()));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["scores"].as_object().unwrap().len(), 9);
    assert_eq!(v["scores"]["psi_roc"]["value"], 1.0);
    assert_eq!(v["scores"]["psi_p"]["better"], "lower");
    assert_eq!(v["scores"]["th"]["value"], 1.0);
    assert_eq!(v["groups"]["a"], 3);
}

#[test]
fn score_subset_with_null_model() {
    let dir = setup();
    let v = json(&sepscore(&["score", "two.csv", "--indices", "psi-roc,th", "--null", "--replicates", "50"], dir.path()));
    assert_eq!(v["scores"].as_object().unwrap().len(), 2);
    let n = &v["null"]["psi_roc"];
    assert_eq!(n["replicates"], 50);
    assert!(n["p_value"].as_f64().unwrap() <= 0.2);
}

#[test]
fn score_reads_stdin() {
    let dir = setup();
    let mut child = Command::new(env!("CARGO_BIN_EXE_sepscore"))
        .args(["score", "-", "--indices", "th"])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(TWO_GROUPS.as_bytes()).unwrap();
    let v = json(&child.wait_with_output().unwrap());
    assert_eq!(v["scores"]["th"]["value"], 1.0);
}

#[test]
fn seed_from_environment_matches_flag() {
    let dir = setup();
    let args = ["nullmodel", "two.csv", "--index", "sh", "--replicates", "40"];
    let flag = sepscore(&[&args[..], &["--seed", "77"]].concat(), dir.path());
    let env = Command::new(env!("CARGO_BIN_EXE_sepscore"))
        .args(args)
        .current_dir(dir.path())
        .env("SEPSCORE_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
    assert_eq!(json(&flag)["null"]["seed"], 77);
}

#[test]
fn csv_output_and_out_file() {
    let dir = setup();
    let out = sepscore(&["score", "two.csv", "--format", "csv", "--out", "s.csv"], dir.path());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(text.starts_with("index,value,flag"));
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn swiss_roll_generation() {
    let dir = setup();
    let out = sepscore(&["gen-swissroll", "--n", "30", "--seed", "2", "--t-out", "t.csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,z,label");
    assert_eq!(text.lines().count(), 31);
    let t = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(t.lines().count(), 31);
}

#[test]
fn evaluate_and_similarity() {
    let dir = setup();
    let d = dir.path();
    for (name, seed) in [("r1.csv", "1"), ("r2.csv", "2"), ("r3.csv", "3")] {
        assert!(sepscore(&["gen-swissroll", "--n", "60", "--seed", seed, "--noise", "1", "--out", name], d).status.success());
    }
    std::fs::write(
        d.join("m.json"),
        r#"{"candidates": [
            {"method": "hd", "path": "r1.csv"},
            {"method": "emb", "params": {"k": "5"}, "path": "r2.csv"},
            {"method": "emb", "params": {"k": "9"}, "path": "r3.csv"}
        ]}"#,
    )
    .unwrap();
    let out = sepscore(&["evaluate", "m.json", "--replicates", "20", "--out", "report.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dataset"], "m");
    assert_eq!(report["candidates"].as_array().unwrap().len(), 3);
    assert_eq!(report["avg_rank"].as_array().unwrap().len(), 2);
    assert!(report["best_per_index"]["psi_roc"].as_array().is_some_and(|b| !b.is_empty()));

    let map = json(&sepscore(&["similarity", "report.json"], d));
    assert_eq!(map["points"].as_array().unwrap().len(), 9);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = setup();
    for flag in ["--help", "--version"] {
        let out = sepscore(&[flag], dir.path());
        assert_eq!(out.status.code(), Some(0));
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = setup();
    for args in [
        &["frobnicate"][..],
        &["score", "two.csv", "--indices", "xyz"],
        &["score", "two.csv", "--alpha", "2"],
        &["nullmodel", "two.csv", "--index", "th", "--replicates", "0"],
        &["score", "two.csv", "--threads", "0"],
    ] {
        let out = sepscore(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
    }
}

#[test]
fn data_errors_exit_two() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "x,label\n1,a\nnope,b\n").unwrap();
    std::fs::write(d.join("one.csv"), "x,label\n1,a\n2,a\n").unwrap();
    for args in [
        &["score", "missing.csv"][..],
        &["score", "bad.csv"],
        &["score", "one.csv"],
        &["score", "two.csv", "--label-col", "class"],
    ] {
        let out = sepscore(args, d);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);
    }
    let err = String::from_utf8(sepscore(&["score", "bad.csv"], d).stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn computation_errors_exit_three() {
    let dir = setup();
    std::fs::write(dir.path().join("p.csv"), "index,c1,c2,c3\npsi_p,1,2,3\npsi_roc,0.5,0.5,0.5\npsi_pr,3,1,2\n").unwrap();
    let out = sepscore(&["similarity", "p.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}
