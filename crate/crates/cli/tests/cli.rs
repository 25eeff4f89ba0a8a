use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fixlab::generate::with_fixed_sources;
use fixlab::io::write_graph_json;
use fixlab::{generate, EvolutionaryGraph, GraphKind, Weighting};
use serde_json::Value;
use tempfile::TempDir;

fn fixlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fixlab"))
        .args(args)
        .env_remove("FIXLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = fixlab(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn ok_text(args: &[&str]) -> String {
    let out = fixlab(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_two_cycle() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "c2.txt", "0 1 1.0\n1 0 1.0\n");
    let v = ok_json(&[
        "solve",
        "--graph",
        s(&g),
        "--config",
        "[0]",
        "--rule",
        "bd",
        "--epsilon",
        "1e-9",
    ]);
    assert_eq!(v["fixation"], 0.5);
    assert_eq!(v["converged"], true);
}

#[test]
fn refusal_is_machine_readable() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "path.txt", "0 1 1\n1 2 1\n");
    let out = fixlab(&["solve", "--graph", s(&g), "--config", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["reason"], "not_strongly_connected");
}

#[test]
fn invalid_graph_is_rejected() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "bad.txt", "0 1 0.5\n1 0 1\n");
    let out = fixlab(&["solve", "--graph", s(&g)]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["reason"], "invalid_graph");
}

#[test]
fn empty_configuration_solves_to_zero() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "c2.txt", "0 1 1\n1 0 1\n");
    let v = ok_json(&["solve", "--graph", s(&g), "--config", "[]"]);
    assert_eq!(v["fixation"], 0.0);
    assert_eq!(v["iterations"], 0);
}

#[test]
fn trajectory_rows() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "c2.txt", "0 1 1\n1 0 1\n");
    let text = ok_text(&[
        "trajectory",
        "--graph",
        s(&g),
        "--config",
        "0",
        "--steps",
        "5",
    ]);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "t,min,max,avg,stdev,ex");
    assert_eq!(lines.len(), 7);
    for line in &lines[1..] {
        assert_eq!(
            line.rsplit(',').next().unwrap().parse::<f64>().unwrap(),
            1.0
        );
    }

    let text = ok_text(&[
        "trajectory",
        "--graph",
        s(&g),
        "--config",
        "0",
        "--steps",
        "0",
    ]);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,"));
}

fn last_ex_fraction(csv: &str, n: f64) -> f64 {
    let last = csv.lines().last().unwrap();
    last.rsplit(',').next().unwrap().parse::<f64>().unwrap() / n
}

#[test]
fn trajectory_on_fixed_sources() {
    let core = generate(
        GraphKind::ErdosRenyi { p: 0.2 },
        30,
        4,
        Weighting::Unweighted,
    )
    .unwrap();
    let lo = (0..30).min_by_key(|&i| (core.out_degree(i), i)).unwrap();
    let hi = (0..30).max_by_key(|&i| (core.out_degree(i), i)).unwrap();
    assert!(core.out_degree(lo) < core.out_degree(hi));
    let dir = TempDir::new().unwrap();
    let g: EvolutionaryGraph = with_fixed_sources(&core, lo, hi).unwrap();
    let path = dir.path().join("sources.json");
    write_graph_json(&path, &g).unwrap();
    let csv = ok_text(&[
        "trajectory",
        "--graph",
        s(&path),
        "--config",
        "30",
        "--steps",
        "40000",
    ]);
    assert!(last_ex_fraction(&csv, 32.0) > 0.5);
}

#[test]
fn amplifier_labels() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "path.txt", "0 1 1\n1 0 0.5\n1 2 0.5\n2 1 1\n");
    let v = ok_json(&["amplifier", "--graph", s(&path)]);
    let classes: Vec<_> = v["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["class"].clone())
        .collect();
    assert_eq!(classes, ["amplifier", "suppressor", "amplifier"]);
    assert!((v["threshold"].as_f64().unwrap() - 1.2).abs() < 1e-12);

    let c4 = write(
        dir.path(),
        "c4.txt",
        "0 1 .5\n0 3 .5\n1 0 .5\n1 2 .5\n2 1 .5\n2 3 .5\n3 2 .5\n3 0 .5\n",
    );
    let v = ok_json(&["amplifier", "--graph", s(&c4)]);
    assert!(v["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .all(|x| x["class"] == "neutral"));

    let star = write(
        dir.path(),
        "star.txt",
        "0 1 .25\n0 2 .25\n0 3 .25\n0 4 .25\n1 0 1\n2 0 1\n3 0 1\n4 0 1\n",
    );
    let v = ok_json(&["amplifier", "--graph", s(&star)]);
    let vs = v["vertices"].as_array().unwrap();
    assert_eq!(vs[0]["class"], "suppressor");
    assert!(vs[1..].iter().all(|x| x["class"] == "amplifier"));
}

#[test]
fn amplifier_needs_unweighted_undirected() {
    let out = fixlab(&[
        "amplifier",
        "--generate",
        "der:n=6,p=0.5,w=random",
        "--graph-seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["reason"], "not_undirected_unweighted");
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time");
    v
}

#[test]
fn manifest_replay_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("run.json");
    let first = ok_json(&[
        "simulate",
        "--generate",
        "er:n=8,p=0.5",
        "--graph-seed",
        "3",
        "--config",
        "0,1",
        "--rule",
        "db-d",
        "--r",
        "1.5",
        "--runs",
        "300",
        "--seed",
        "9",
        "--manifest",
        s(&manifest),
    ]);
    let again = ok_json(&["replay", s(&manifest)]);
    assert_eq!(without_wall_time(first), without_wall_time(again));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["args"]["seed"], 9);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = [
        "simulate",
        "--generate",
        "er:n=10,p=0.4",
        "--runs",
        "400",
        "--seed",
        "2",
    ];
    let one = ok_json(&[&args[..], &["--threads", "1"]].concat());
    let four = ok_json(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(without_wall_time(one), without_wall_time(four));
}

#[test]
fn oracle_two_cycle() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "c2.txt", "0 1 1\n1 0 1\n");
    let v = ok_json(&[
        "oracle",
        "--graph",
        s(&g),
        "--config",
        "0",
        "--rule",
        "bd-b",
        "--r",
        "2",
    ]);
    assert!((v["fixation"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let v = ok_json(&["oracle", "--graph", s(&g), "--config", "0,1"]);
    assert_eq!(v["fixation"], 1.0);
    assert_eq!(v["mean_fixation_time"], 0.0);
    assert_eq!(v["mean_extinction_time"], Value::Null);
}

#[test]
fn bounds_and_mttf() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "c2.txt", "0 1 1\n1 0 1\n");
    let v = ok_json(&[
        "bounds",
        "--graph",
        s(&g),
        "--vertex",
        "0",
        "--rule",
        "bd-b",
        "--r",
        "2",
        "--epsilon",
        "1e-9",
    ]);
    assert!((v["upper"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((v["lower"].as_f64().unwrap() - 0.5).abs() < 1e-9);

    let trace = dir.path().join("mttf.csv");
    let v = ok_json(&[
        "mttf",
        "--graph",
        s(&g),
        "--config",
        "0",
        "--exact",
        "--out",
        s(&trace),
    ]);
    assert_eq!(v["bound"]["lower_bound"], 1.0);
    assert!((v["exact"]["fixation"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("t,p_min,increment,running_sum\n"));
}

#[test]
fn compare_appends_benchmark_rows() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("bench.csv");
    for seed in ["1", "2"] {
        let v = ok_json(&[
            "compare",
            "--generate",
            "er:n=12,p=0.4",
            "--config",
            "0",
            "--runs",
            "500",
            "--seed",
            seed,
            "--out",
            s(&table),
        ]);
        assert!(v["speedup"].as_f64().unwrap() > 0.0);
    }
    let csv = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "n,rule,r,mc_time,solver_time,speedup");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("12,bd,1.0,"));

    let out = fixlab(&["compare", "--generate", "er:n=12,p=0.4", "--r", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_writes_files() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("g.json");
    let v = ok_json(&[
        "generate",
        "--generate",
        "pa:n=100,m=1",
        "--seed",
        "5",
        "--out",
        s(&json),
    ]);
    assert_eq!(v["edges"], 198);
    assert_eq!(v["strongly_connected"], true);
    let again = ok_json(&["solve", "--graph", s(&json), "--config", "0"]);
    assert_eq!(again["converged"], true);

    let edges = dir.path().join("g.txt");
    ok_json(&[
        "generate",
        "--generate",
        "sw:n=20,k=4,p=0.1",
        "--out",
        s(&edges),
    ]);
    assert!(std::fs::read_to_string(&edges).unwrap().lines().count() >= 80);
}
