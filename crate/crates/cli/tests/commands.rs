use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlrd_core::energy::MONITOR_NAMES;
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn nlrd(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlrd"))
        .arg(cmd)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const LAMBDA: &str = r#"
[problem]
length = "pi"
reaction = { kind = "cubic", lambda = LAMBDA }
diffusion = { kind = "constant", m = 1.0 }
"#;

fn lambda_config(dir: &Path, lambda: f64, extra: &str) -> PathBuf {
    write_config(dir, &format!("{}{extra}", LAMBDA.replace("LAMBDA", &format!("{lambda:?}"))))
}

#[test]
fn linear_smoke_matches_exponential_decay() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlrd("simulate", &config("linear_smoke.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,l2,h1,lp,energy,a_value,dissipation,gamma_1,gamma_2,gamma_3,gamma_4");
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[7] - (-cols[0]).exp()).abs() <= 1e-6, "{line}");
        rows += 1;
    }
    assert!(rows >= 9);
}

#[test]
fn default_lambda_two_monitors_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlrd("simulate", &config("chafee_infante_lambda2.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&dir.path().join("summary.json"));
    let verdict = |name: &str| {
        summary["monitors"].as_array().unwrap().iter().find(|m| m["name"] == name).unwrap()["verdict"]["status"].clone()
    };
    assert_eq!(verdict("absorbing_ball"), "pass");
    assert_eq!(verdict("energy_nonincreasing"), "pass");
}

#[test]
fn coarse_steps_fail_numerically() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlrd("simulate", &config("coarse_steps.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["failure"]["kind"], "step_underflow");
}

#[test]
fn equilibria_counts_and_order() {
    let dir = tempfile::tempdir().unwrap();
    for (lambda, count) in [(0.5, 1), (2.0, 3), (5.0, 5)] {
        let cfg = lambda_config(dir.path(), lambda, "");
        let out_dir = dir.path().join(format!("eq{lambda}"));
        let out = nlrd("equilibria", &cfg, &out_dir, &[]);
        assert_eq!(out.status.code(), Some(0));
        let set = json(&out_dir.join("equilibria.json"));
        let eqs = set["equilibria"].as_array().unwrap();
        assert_eq!(eqs.len(), count, "lambda = {lambda}");
        let energies: Vec<f64> = eqs.iter().map(|e| e["energy"].as_f64().unwrap()).collect();
        assert!(energies.windows(2).all(|w| w[0] <= w[1] + 1e-9));
        if lambda == 2.0 {
            let lead: Vec<f64> = eqs.iter().map(|e| e["coefficients"][0].as_f64().unwrap()).collect();
            assert!(lead[0] > 0.0 && lead[1] < 0.0 && lead[2] == 0.0, "{lead:?}");
        }
    }
}

#[test]
fn connections_use_stored_equilibria() {
    let dir = tempfile::tempdir().unwrap();
    for (lambda, edges) in [(2.0, 2), (0.5, 0)] {
        let cfg = lambda_config(dir.path(), lambda, "");
        let out_dir = dir.path().join(format!("c{lambda}"));
        assert_eq!(nlrd("equilibria", &cfg, &out_dir, &[]).status.code(), Some(0));
        let out = nlrd("connections", &cfg, &out_dir, &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let graph = json(&out_dir.join("connections.json"));
        assert_eq!(graph["edges"].as_array().unwrap().len(), edges, "lambda = {lambda}");
    }
}

#[test]
fn connections_without_equilibria_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lambda_config(dir.path(), 2.0, "");
    let out = nlrd("connections", &cfg, &dir.path().join("empty"), &[]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = lambda_config(dir.path(), 2.0, "\n[analysis]\nequilibria_file = \"missing.json\"\n");
    let out = nlrd("connections", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("analysis.equilibria_file"));
}

#[test]
fn unknown_keys_are_config_errors_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lambda_config(dir.path(), 2.0, "\n[flow]\nrel_toll = 1e-3\n");
    let out = nlrd("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rel_toll") && err.contains("line 8"), "{err}");
}

#[test]
fn constructed_violation_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlrd("verify", &config("false_monotone_claim.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], false);
}

#[test]
fn verify_reports_each_monitor_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlrd("verify", &config("chafee_infante_lambda2.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("verify.json"));
    let names: Vec<&str> =
        report["simulation"]["monitors"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    for name in MONITOR_NAMES {
        assert_eq!(names.iter().filter(|n| **n == name).count(), 1, "{name}");
    }
    assert_eq!(report["structure"]["verdict"], "pass");
    assert_eq!(report["passed"], true);
}

#[test]
fn flag_overrides_beat_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlrd("simulate", &config("linear_smoke.toml"), dir.path(), &["--modes", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with("gamma_6"));
}

#[test]
fn seeds_change_random_initial_states_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("chafee_infante_lambda2.toml");
    let run = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        assert_eq!(nlrd("simulate", &cfg, &d, &["--seed", seed]).status.code(), Some(0));
        std::fs::read(d.join("trajectory.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "c"), run("4", "d"));
}
