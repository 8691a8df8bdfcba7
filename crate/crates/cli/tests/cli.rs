use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bridge() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/bridge6.json")
}

fn qperc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qperc"))
        .args(args)
        .env_remove("QPERC_SEED")
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = qperc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
        })
        .collect()
}

/// Output with the wall-clock entries removed.
fn stable(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| !l.contains("wall_time"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn generate_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("b.json");
    let v = json_ok(&[
        "generate", "--family", "bethe", "--k", "3", "--L", "2", "--theta", "0.5", "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(v["nodes"], 10);
    assert_eq!(v["edges"], 9);
    assert_eq!(v["manifest"]["command"], "generate");
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(written["nodes"].as_array().unwrap().len(), 10);

    let sq = dir.path().join("s.json");
    let v = json_ok(&["generate", "--family", "square", "--n", "3", "--out", sq.to_str().unwrap()]);
    assert_eq!(v["nodes"], 9);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let bad = qperc(&["generate", "--family", "bethe", "--k", "1", "--L", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(bad.stdout.is_empty());
    assert!(!bad.stderr.is_empty());
    assert_eq!(qperc(&["generate", "--bogus"]).status.code(), Some(2));
    assert_eq!(qperc(&["oracle", "--file", "/nonexistent/net.json"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("curves.json");
    let curve = |d: f64| {
        serde_json::json!({
            "distance": d,
            "lengths": [1000.0, 2000.0, 3000.0, 4000.0],
            "values": [0.1, 0.05, 0.02, 0.01],
        })
    };
    std::fs::write(&file, serde_json::to_string(&vec![curve(1e-5), curve(1e-4)]).unwrap()).unwrap();
    let out = qperc(&["scaling", "--file", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_on_bridge() {
    let v = json_ok(&["oracle", "--file", bridge().to_str().unwrap()]);
    assert!((v["value"].as_f64().unwrap() - 0.0799).abs() < 1e-4);
    assert_eq!(v["edges"], 7);
}

#[test]
fn oracle_refuses_large_networks() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sq.json");
    json_ok(&["generate", "--family", "square", "--n", "6", "--out", file.to_str().unwrap()]);
    let out = qperc(&["oracle", "--file", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}

#[test]
fn star_mesh_reduce_on_bridge() {
    let v = json_ok(&[
        "reduce", "--file", bridge().to_str().unwrap(), "--system", "classical", "--method", "star-mesh",
    ]);
    assert!((v["theta"].as_f64().unwrap() - 0.25).abs() < 0.01);
    let out = qperc(&["reduce", "--file", bridge().to_str().unwrap(), "--method", "sp"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("series-parallel"));
}

#[test]
fn interdependent_single_layer() {
    let v = json_ok(&["analyze", "interdep", "--n", "1", "--kbar", "5"]);
    assert!((v["critical"]["p_th"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn bethe_parallel_threshold() {
    let v = json_ok(&["threshold", "--family", "bethe", "--k", "4", "--L", "100", "--method", "parallel-approx"]);
    let t = v["estimate"]["theta_quarter_pi"].as_f64().unwrap();
    assert!((t - 0.39).abs() < 0.005, "{t}");
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    json_ok(&["generate", "--family", "bethe", "--k", "3", "--L", "12", "--out", tree.to_str().unwrap()]);
    let out = qperc(&["sweep", "--file", tree.to_str().unwrap(), "--system", "concurrence"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8_lossy(&out.stdout));
    assert_eq!(rows.len(), 51);
    assert!(rows.windows(2).all(|w| w[1].1 >= w[0].1));
    let cross = rows.windows(2).find(|w| w[0].1 < 0.5 && w[1].1 >= 0.5).unwrap();
    assert!((cross[0].0 - 0.5).abs() < 0.05 && (cross[1].0 - 0.5).abs() < 0.05);

    let one = qperc(&[
        "sweep", "--file", tree.to_str().unwrap(), "--points", "1", "--from", "1", "--to", "1",
    ]);
    assert_eq!(csv_rows(&String::from_utf8_lossy(&one.stdout)), vec![(1.0, 1.0)]);

    let csv = dir.path().join("curve.csv");
    let to_file = qperc(&[
        "sweep", "--file", bridge().to_str().unwrap(), "--method", "exact-classical", "--system",
        "classical", "--points", "5", "--out", csv.to_str().unwrap(),
    ]);
    assert!(to_file.status.success() && to_file.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# command: sweep"));

    let mismatch = qperc(&["sweep", "--file", bridge().to_str().unwrap(), "--method", "exact-sp"]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, env_seed: Option<&str>, flag: &[&str]| {
        let file = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qperc"));
        cmd.args(["generate", "--family", "er", "--nodes", "200", "--kbar", "3", "--out"])
            .arg(&file)
            .args(flag)
            .env_remove("QPERC_SEED");
        if let Some(s) = env_seed {
            cmd.env("QPERC_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read_to_string(file).unwrap()
    };
    let from_env = gen("a.json", Some("5"), &[]);
    let from_flag = gen("b.json", None, &["--seed", "5"]);
    let other = gen("c.json", None, &["--seed", "6"]);
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, other);
}

#[test]
fn identical_runs_give_identical_output() {
    let bridge = bridge();
    let runs: [Vec<&str>; 3] = [
        vec!["threshold", "--family", "er", "--nodes", "300", "--kbar", "3", "--m", "3", "--realizations", "4"],
        vec!["sweep", "--file", bridge.to_str().unwrap(), "--method", "star-mesh", "--points", "7"],
        vec!["analyze", "scaling", "--lmax", "2e4", "--dmin", "1e-4", "--dmax", "1e-2"],
    ];
    for args in &runs {
        let a = qperc(args);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        let mut with_jobs = vec!["--jobs", "1"];
        with_jobs.extend(args.iter().copied());
        let b = qperc(&with_jobs);
        assert_eq!(stable(&a), stable(&b), "{args:?}");
    }
}
