//! End-to-end tests of the `optmix` binary: exit codes, config validation,
//! physical sanity of `simulate`, and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn optmix() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optmix"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    optmix().args(args).output().unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

const BASE: &str = r#"{
    "grid": { "nx": 32, "ny": 17 },
    "physics": { "k": 1.0, "epsilon": 0.0, "gamma": 1e-3, "T": 0.25 },
    "initial": "stripe"
}"#;

#[test]
fn unknown_config_key_is_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": { "nx": 32, "ny": 17 },
            "physics": { "k": 1.0, "epsilonn": 0.0, "gamma": 1e-3, "T": 0.25 },
            "initial": "stripe"
        }"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epsilonn"), "stderr should name the bad key: {err}");
}

#[test]
fn simulate_zero_control_zero_diffusion_preserves_mixnorm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let s = summary(dir.path());
    let m0 = s["mixnorm_initial"].as_f64().unwrap();
    let mt = s["mixnorm_final"].as_f64().unwrap();
    assert!(
        (mt - m0).abs() / m0 < 1e-3,
        "mixnorm should be unchanged without stirring or diffusion: {m0} -> {mt}"
    );
    assert!(s["drift_mass"].as_f64().unwrap() < 1e-12);
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("diagnostics.csv").exists());
}

#[test]
fn plug_flow_translation_preserves_mixnorm() {
    // A uniform plug just translates the stripe; the mix-norm is invariant.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": { "nx": 32, "ny": 17 },
            "physics": { "k": 1.0, "epsilon": 0.0, "gamma": 1e-3, "T": 0.25 },
            "initial": "stripe",
            "control": { "type": "plug", "amplitude": 1.0 }
        }"#,
    );
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let s = summary(dir.path());
    let m0 = s["mixnorm_initial"].as_f64().unwrap();
    let mt = s["mixnorm_final"].as_f64().unwrap();
    assert!(
        (mt - m0).abs() / m0 < 1e-3,
        "translation must not change the mix-norm: {m0} -> {mt}"
    );
}

#[test]
fn optimize_without_optimizer_block_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = run(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn optimize_writes_history_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": { "nx": 16, "ny": 9 },
            "physics": { "k": 1.0, "epsilon": 1e-2, "gamma": 0.5, "T": 0.2 },
            "initial": "checkerboard",
            "control": { "type": "random", "amplitude": 0.3 },
            "optimizer": { "max_iters": 5, "tol_g": 1e-10 }
        }"#,
    );
    let out = run(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let hist = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(hist.starts_with("iter,J,mix_term,control_term,grad_norm,step,residual"));
    assert!(hist.lines().count() >= 2);
    assert!(dir.path().join("g_final_bottom.fld").exists());
    assert!(dir.path().join("g_final_top.fld").exists());
    let s = summary(dir.path());
    assert!(s["J_final"].as_f64().unwrap() <= s["J0"].as_f64().unwrap() * 1.0 + 1e-12);
}

#[test]
fn mixnorm_subcommand_reads_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let snap = dir.path().join("theta_000000.fld");
    let out = run(&["mixnorm", snap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let printed: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let s = summary(dir.path());
    let m0 = s["mixnorm_initial"].as_f64().unwrap();
    assert!((printed - m0).abs() <= 1e-12 * m0.max(1.0), "{printed} vs {m0}");
}

#[test]
fn runs_are_reproducible_under_fixed_seed() {
    let mk = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            r#"{
                "grid": { "nx": 16, "ny": 9 },
                "physics": { "k": 1.0, "epsilon": 1e-2, "gamma": 0.5, "T": 0.2 },
                "initial": "blob",
                "control": { "type": "random", "amplitude": 0.4 },
                "optimizer": { "max_iters": 3, "tol_g": 1e-10 }
            }"#,
        );
        let out = run(&[
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
            "--seed",
            "42",
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        (
            std::fs::read_to_string(dir.path().join("history.csv")).unwrap(),
            std::fs::read(dir.path().join("g_final_bottom.fld")).unwrap(),
        )
    };
    let (h1, g1) = mk();
    let (h2, g2) = mk();
    assert_eq!(h1, h2, "history must be byte-identical under a fixed seed");
    assert_eq!(g1, g2, "control artifact must be byte-identical");
}

#[test]
fn check_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": { "nx": 24, "ny": 13 },
            "physics": { "k": 1.0, "epsilon": 1e-2, "gamma": 1e-3, "T": 0.2 },
            "initial": "stripe",
            "control": { "type": "random", "amplitude": 0.5 }
        }"#,
    );
    let out = run(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--seed",
        "3",
    ]);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("checks.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}\nreport: {report}");
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 4);
}

#[test]
fn invalid_physics_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": { "nx": 32, "ny": 17 },
            "physics": { "k": -1.0, "epsilon": 0.0, "gamma": 1e-3, "T": 0.25 },
            "initial": "stripe"
        }"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}
