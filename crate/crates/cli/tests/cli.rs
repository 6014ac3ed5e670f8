use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn robustkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn path(dir: &TempDir, rel: &str) -> PathBuf {
    dir.path().join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn generate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let out = path(dir, name);
    let mut args = vec!["generate", "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = robustkit(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("instance.json")
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let flags = ["--family", "lp", "--n", "10", "--m", "20", "--k", "5", "--seed", "7"];
    let a = generate(&dir, "a", &flags);
    let b = generate(&dir, "b", &flags);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let doc = json(&a);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["instance"]["family"], "lp");
    assert_eq!(doc["instance"]["ground_truth"]["robust_feasible"], true);
}

#[test]
fn generate_rejects_unknown_family() {
    let dir = TempDir::new().unwrap();
    let o = robustkit(&["generate", "--family", "milp", "--out", s(&path(&dir, "x"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_sigma_qp_has_no_noise() {
    let dir = TempDir::new().unwrap();
    let file = generate(
        &dir,
        "q",
        &["--family", "qp", "--n", "3", "--m", "2", "--k", "2", "--sigma", "0"],
    );
    let doc = json(&file);
    let noise = doc["instance"]["p"].as_array().unwrap();
    assert_eq!(noise.len(), 2);
    for matrix in noise {
        for row in matrix.as_array().unwrap() {
            assert!(row.as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
        }
    }
}

#[test]
fn solve_and_verify_feasible_lp() {
    let dir = TempDir::new().unwrap();
    let instance = generate(&dir, "g", &["--seed", "3"]);
    let run = path(&dir, "run");
    let o = robustkit(&[
        "solve",
        "--instance",
        s(&instance),
        "--alg",
        "subgradient",
        "--eps",
        "0.1",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&run.join("summary.json"));
    assert_eq!(summary["verdict"], "solved");
    assert_eq!(summary["horizon"], 400);
    assert_eq!(summary["schema_version"], 1);

    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,max_violation,running_average,oracle_iterations,elapsed_seconds,violations"
    );
    assert_eq!(lines.count(), 400);

    let summary_path = run.join("summary.json");
    let v = robustkit(&[
        "verify",
        "--instance",
        s(&instance),
        "--solution",
        s(&summary_path),
        "--threshold",
        "0.2",
        "--out",
        s(&path(&dir, "v")),
    ]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    let cert = json(&path(&dir, "v").join("certificate.json"));
    assert_eq!(cert["report"]["passed"], true);
    assert_eq!(cert["certificate"]["method"], "closed-form");
}

#[test]
fn verify_zero_threshold_names_offending_constraint() {
    let dir = TempDir::new().unwrap();
    let instance = generate(&dir, "g", &["--seed", "7"]);
    let run = path(&dir, "run");
    assert_eq!(
        code(&robustkit(&["solve", "--instance", s(&instance), "--out", s(&run)])),
        0
    );
    let out = path(&dir, "v");
    let v = robustkit(&[
        "verify",
        "--instance",
        s(&instance),
        "--solution",
        s(&run.join("summary.json")),
        "--threshold",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&v), 3);
    let cert = json(&out.join("certificate.json"));
    assert_eq!(cert["report"]["passed"], false);
    let offending = cert["report"]["offending"].as_array().unwrap();
    assert!(!offending.is_empty());
    assert!(String::from_utf8_lossy(&v.stderr).contains(&offending[0].to_string()));
}

#[test]
fn verify_rejects_malformed_solution() {
    let dir = TempDir::new().unwrap();
    let instance = generate(&dir, "g", &[]);
    let bad = path(&dir, "bad.json");
    fs::write(&bad, "{\"solution\": [1, \"x\"]}").unwrap();
    let v = robustkit(&[
        "verify",
        "--instance",
        s(&instance),
        "--solution",
        s(&bad),
        "--threshold",
        "0.1",
        "--out",
        s(&path(&dir, "v")),
    ]);
    assert_eq!(code(&v), 2);
    fs::write(&bad, "not json").unwrap();
    let v = robustkit(&[
        "verify",
        "--instance",
        s(&instance),
        "--solution",
        s(&bad),
        "--threshold",
        "0.1",
        "--out",
        s(&path(&dir, "v")),
    ]);
    assert_eq!(code(&v), 2);
    fs::write(&bad, "[0.0, 0.0]").unwrap();
    let v = robustkit(&[
        "verify",
        "--instance",
        s(&instance),
        "--solution",
        s(&bad),
        "--threshold",
        "0.1",
        "--out",
        s(&path(&dir, "v")),
    ]);
    assert_eq!(code(&v), 2);
}

#[test]
fn infeasible_instance_exits_three_and_certificate_verifies() {
    let dir = TempDir::new().unwrap();
    let instance = generate(&dir, "g", &["--infeasible", "--seed", "2"]);
    let run = path(&dir, "run");
    for alg in ["subgradient", "perturbation"] {
        let o = robustkit(&["solve", "--instance", s(&instance), "--alg", alg, "--out", s(&run)]);
        assert_eq!(code(&o), 3);
        let summary = json(&run.join("summary.json"));
        assert_eq!(summary["verdict"], "infeasible");
        assert!(summary["infeasibility"]["certificate"]["bound"].as_f64().unwrap() > 0.0);
    }
    let out = path(&dir, "v");
    let v = robustkit(&[
        "verify",
        "--instance",
        s(&instance),
        "--solution",
        s(&run.join("summary.json")),
        "--threshold",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    assert!(
        json(&out.join("certificate.json"))["recomputed_bound"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}

#[test]
fn solve_exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.json");
    assert_eq!(
        code(&robustkit(&[
            "solve",
            "--instance",
            s(&missing),
            "--out",
            s(&path(&dir, "a"))
        ])),
        2
    );
    assert_eq!(
        code(&robustkit(&["solve", "--eps", "0", "--out", s(&path(&dir, "b"))])),
        2
    );
    assert_eq!(
        code(&robustkit(&["solve", "--alg", "simplex", "--out", s(&path(&dir, "c"))])),
        2
    );
    // Subgradient steps need concavity in the noise, which QCQP lacks.
    assert_eq!(
        code(&robustkit(&[
            "solve",
            "--family",
            "qp",
            "--n",
            "3",
            "--m",
            "2",
            "--k",
            "2",
            "--out",
            s(&path(&dir, "d"))
        ])),
        2
    );

    let out = path(&dir, "budget");
    let o = robustkit(&["solve", "--seed", "4", "--oracle-budget", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 4);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["verdict"], "budget");
    assert!(summary["error"].as_str().unwrap().contains("budget"));
}

#[test]
fn timing_is_opt_in() {
    let dir = TempDir::new().unwrap();
    let plain = path(&dir, "plain");
    let timed = path(&dir, "timed");
    assert_eq!(code(&robustkit(&["solve", "--out", s(&plain)])), 0);
    assert_eq!(code(&robustkit(&["solve", "--timing", "--out", s(&timed)])), 0);
    assert!(json(&plain.join("summary.json"))["wall_time_seconds"].is_null());
    assert!(json(&timed.join("summary.json"))["wall_time_seconds"]
        .as_f64()
        .is_some());
    let row = fs::read_to_string(timed.join("trace.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(!row.split(',').nth(4).unwrap().is_empty());
}

#[test]
fn regret_bench_rows_respect_bounds() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "ogd");
    let o = robustkit(&[
        "regret-bench",
        "--learner",
        "ogd",
        "--seeds",
        "50",
        "--rounds",
        "100",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let mut reader = csv::Reader::from_path(out.join("regret.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["seed", "regret", "bound"]
    );
    let rows: Vec<(u64, f64, f64)> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(rows.iter().all(|r| r.1 <= r.2));

    let out = path(&dir, "fpl");
    let o = robustkit(&[
        "regret-bench",
        "--learner",
        "fpl",
        "--seeds",
        "100",
        "--rounds",
        "200",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let rows: Vec<(u64, f64, f64)> = csv::Reader::from_path(out.join("regret.csv"))
        .unwrap()
        .deserialize()
        .map(Result::unwrap)
        .collect();
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    assert!(mean <= rows[0].2);
}

#[test]
fn regret_bench_rejects_zero_rounds() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&robustkit(&[
            "regret-bench",
            "--rounds",
            "0",
            "--out",
            s(&path(&dir, "r"))
        ])),
        2
    );
}

#[test]
fn plot_single_and_overlaid_traces() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "alg1");
    let b = path(&dir, "alg2");
    assert_eq!(
        code(&robustkit(&[
            "solve",
            "--n",
            "4",
            "--m",
            "3",
            "--k",
            "2",
            "--out",
            s(&a)
        ])),
        0
    );
    assert_eq!(
        code(&robustkit(&[
            "solve",
            "--n",
            "4",
            "--m",
            "3",
            "--k",
            "2",
            "--alg",
            "perturbation",
            "--out",
            s(&b)
        ])),
        0
    );
    let one = path(&dir, "p1");
    assert_eq!(
        code(&robustkit(&["plot", s(&a.join("trace.csv")), "--out", s(&one)])),
        0
    );
    let svg = fs::read_to_string(one.join("convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("max violation"));

    let two = path(&dir, "p2");
    assert_eq!(
        code(&robustkit(&[
            "plot",
            s(&a.join("trace.csv")),
            s(&b.join("trace.csv")),
            "--out",
            s(&two)
        ])),
        0
    );
    let svg = fs::read_to_string(two.join("convergence.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">alg1<") && svg.contains(">alg2<"));
}

#[test]
fn plot_rejects_empty_trace() {
    let dir = TempDir::new().unwrap();
    let empty = path(&dir, "empty.csv");
    fs::write(
        &empty,
        "t,max_violation,running_average,oracle_iterations,elapsed_seconds,violations\n",
    )
    .unwrap();
    assert_eq!(code(&robustkit(&["plot", s(&empty), "--out", s(&path(&dir, "p"))])), 2);
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&robustkit(&["plot", s(&empty), "--out", s(&path(&dir, "p"))])), 2);
}
