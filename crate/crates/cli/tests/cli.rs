use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pdecomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdecomp"))
        .args(args)
        .env_remove("PDECOMP_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn usage_error(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);
    err
}

fn solve_small(dir: &Path) -> String {
    let policy = dir.join("policy.bin");
    let args = [
        "solve",
        "--model",
        "sep-2di",
        "--tree",
        "[(u1|x1,x2), (u2|x3,x4)]",
        "--points",
        "9",
        "--actions",
        "5",
        "--out",
        policy.to_str().unwrap(),
    ];
    stdout(&pdecomp(&args));
    policy.to_str().unwrap().to_string()
}

#[test]
fn count_prints_total_first() {
    let text = stdout(&pdecomp(&["count", "--n", "2", "--m", "2"]));
    assert_eq!(text.lines().next(), Some("8"));
}

#[test]
fn enumerate_lists_every_tree_once() {
    let text = stdout(&pdecomp(&["enumerate", "--n", "2", "--m", "3"]));
    let mut lines: Vec<&str> = text.lines().collect();
    let total: usize = stdout(&pdecomp(&["count", "--n", "2", "--m", "3"])).lines().next().unwrap().parse().unwrap();
    assert_eq!(lines.len(), total);
    lines.sort();
    lines.dedup();
    assert_eq!(lines.len(), total);
}

#[test]
fn enumerate_respects_cap() {
    let out = pdecomp(&["enumerate", "--n", "3", "--m", "3", "--cap", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_is_seeded() {
    let args = ["sample", "--n", "3", "--m", "3", "--count", "20", "--seed", "4"];
    let a = stdout(&pdecomp(&args));
    assert_eq!(a.lines().count(), 20);
    assert_eq!(a, stdout(&pdecomp(&args)));
}

#[test]
fn estimate_block_tree_is_exact() {
    let v = json(&pdecomp(&["estimate", "--model", "sep-2di", "--tree", "[(u1|x1,x2), (u2|x3,x4)]"]));
    assert!(v["err_lqr"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["f"].as_f64().unwrap(), 0.0);
    assert!(v["header"]["config_digest"].is_string());
}

#[test]
fn deterministic_search_is_byte_identical() {
    for method in ["ga", "mcts", "random"] {
        let args = ["--workers", "1", "search", "--model", "sep-di+int", "--method", method, "--budget-steps", "20", "--seed", "3"];
        let a = pdecomp(&args);
        let b = pdecomp(&args);
        assert_eq!(stdout(&a), stdout(&b), "{method}");
    }
}

#[test]
fn deterministic_pareto_is_byte_identical() {
    let args = ["--workers", "1", "pareto", "--model", "toy-2x2", "--budget-steps", "5", "--population", "12"];
    let a = stdout(&pdecomp(&args));
    assert_eq!(a, stdout(&pdecomp(&args)));
    let v: Value = serde_json::from_str(&a).unwrap();
    assert!(v.to_string().contains("[(u1,u2|x1,x2)]"));
}

#[test]
fn search_writes_report_under_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pdecomp"))
        .args(["--workers", "1", "search", "--model", "toy-2x2", "--budget-steps", "3", "--out", "reports/ga.json"])
        .env("PDECOMP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("reports/ga.json")).unwrap()).unwrap();
    assert_eq!(v["model"], "toy-2x2");
}

#[test]
fn solve_then_simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let policy = solve_small(dir.path());
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for path in [&first, &second] {
        let v = json(&pdecomp(&[
            "simulate",
            "--policy",
            &policy,
            "--x0=0.5,0,-0.5,0",
            "--duration",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]));
        assert_eq!(v["diverged"], Value::Null);
    }
    let a = fs::read_to_string(&first).unwrap();
    assert_eq!(a, fs::read_to_string(&second).unwrap());
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,q_1,v_1,q_2,v_2,u1_1,u1_2");
    assert_eq!(rows.len(), 202);
}

#[test]
fn basin_reports_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let policy = solve_small(dir.path());
    let map = dir.path().join("basin.csv");
    let v = json(&pdecomp(&[
        "basin",
        "--policy",
        &policy,
        "--slice",
        "x1,x2",
        "--resolution",
        "3",
        "--duration",
        "5",
        "--out",
        map.to_str().unwrap(),
    ]));
    let f = v["converged_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f));
    let text = fs::read_to_string(&map).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 10);
}

#[test]
fn simulate_rejects_wrong_state_length() {
    let dir = tempfile::tempdir().unwrap();
    let policy = solve_small(dir.path());
    usage_error(&pdecomp(&["simulate", "--policy", &policy, "--x0=0.5,0"]));
}

#[test]
fn simulate_rejects_config_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let policy = solve_small(dir.path());
    let config = dir.path().join("run.cfg");
    fs::write(&config, "search.population = 10\n").unwrap();
    let err = usage_error(&pdecomp(&[
        "--config",
        config.to_str().unwrap(),
        "simulate",
        "--policy",
        &policy,
        "--x0=0.1,0,0,0",
    ]));
    assert!(err["error"]["message"].as_str().unwrap().contains("config"));
}

#[test]
fn unknown_model_is_usage_error() {
    let err = usage_error(&pdecomp(&["estimate", "--model", "nope", "--tree", "[(u1|x1)]"]));
    assert_eq!(err["error"]["kind"], "unknown_model");
}

#[test]
fn bad_flag_and_bad_tree_are_usage_errors() {
    usage_error(&pdecomp(&["count", "--n", "2"]));
    usage_error(&pdecomp(&["count", "--n", "2", "--m", "2", "--bogus"]));
    usage_error(&pdecomp(&["estimate", "--model", "sep-2di", "--tree", "[(u1|x1"]));
    usage_error(&pdecomp(&["--workers", "0", "count", "--n", "2", "--m", "2"]));
}
