use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 11
theta = [-1.0, 0.4]
[model]
[[model.parameter]]
name = "edges"
[[model.parameter]]
name = "transitive"
[[model.term]]
kind = "edges"
coef = "edges"
[[model.term]]
kind = "transitive"
coef = "transitive"
[estimator]
draws = 200
[gof]
replicates = 20
"#;

fn mlergm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlergm")).args(args).current_dir(dir).output().unwrap()
}

fn workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.toml"), CONFIG).unwrap();
    let mut nodes = String::from("node_id,neighborhood_id,sex\n");
    for k in 0..8 {
        for v in 0..8 {
            nodes.push_str(&format!("s{k}_{v},c{k},{}\n", ["f", "m"][v % 2]));
        }
    }
    std::fs::write(tmp.path().join("nodes.csv"), nodes).unwrap();
    tmp
}

#[test]
fn simulate_estimate_gof_pipeline() {
    let tmp = workspace();
    let dir = tmp.path();
    let out = mlergm(dir, &["simulate", "--config", "run.toml", "--nodes", "nodes.csv", "--out", "sim"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats = std::fs::read_to_string(dir.join("sim/stats.csv")).unwrap();
    assert!(stats.starts_with("neighborhood,draw,term,value\nc0,0,edges,"));
    let data = ["--nodes", "nodes.csv", "--edges", "sim/edges_0.csv"];
    let out = mlergm(dir, &[&["estimate", "--config", "run.toml", "--out", "est"][..], &data].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = std::fs::read_to_string(dir.join("est/estimates.csv")).unwrap();
    let lines: Vec<&str> = est.lines().collect();
    assert_eq!(lines[0], "coordinate,estimate,se,status");
    assert!(lines[1].starts_with("edges,") && lines[1].ends_with(",,converged"));
    assert!(std::fs::read_to_string(dir.join("est/trace.csv")).unwrap().starts_with("iteration,"));
    let out = mlergm(dir, &[&["gof", "--config", "run.toml", "--out", "gof", "--theta", "-1,0.4"][..], &data].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gof = std::fs::read_to_string(dir.join("gof/gof.csv")).unwrap();
    assert!(gof.contains("\ngeodesic,inf,"));
    assert!(gof.contains("\nterm,transitive,"));
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = workspace();
    let dir = tmp.path();
    assert_eq!(mlergm(dir, &["estimate", "--bogus"]).status.code(), Some(1));
    assert_eq!(mlergm(dir, &["gof", "--config", "missing.toml", "--nodes", "a", "--edges", "b"]).status.code(), Some(1));
    std::fs::write(dir.join("bad.csv"), "tail,head\ns0_0,s1_0\n").unwrap();
    let out = mlergm(dir, &["estimate", "--config", "run.toml", "--nodes", "nodes.csv", "--edges", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    std::fs::write(dir.join("empty.csv"), "tail,head\n").unwrap();
    let out = mlergm(dir, &["estimate", "--config", "run.toml", "--nodes", "nodes.csv", "--edges", "empty.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mlergm(dir, &["gof", "--config", "run.toml", "--nodes", "nodes.csv", "--edges", "empty.csv", "--draws", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = workspace();
    let dir = tmp.path();
    let run = |workers: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_mlergm"))
            .args(["simulate", "--config", "run.toml", "--nodes", "nodes.csv", "--draws", "4", "--out", out])
            .env("MLERGM_WORKERS", workers)
            .current_dir(dir)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.join(out).join("stats.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("3", "b"));
}
