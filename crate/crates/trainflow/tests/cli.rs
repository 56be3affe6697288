//! End-to-end tests of the `trainflow` binary: subcommands, output files,
//! determinism, and exit codes.

use std::path::Path;
use std::process::Command;

fn trainflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trainflow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn spectrum_subcommand_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "spectrum.json",
        r#"{
            "experiment": "spectrum",
            "schemes": [{"kind": "gershgorin_discrete", "n": 6}],
            "trials": 25,
            "base_seed": 3
        }"#,
    );
    let out = dir.path().join("out");
    let status = trainflow()
        .args(["spectrum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--svg")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("metadata.json").exists());
    assert!(out.join("spectrum_summary.csv").exists());
    assert!(out.join("spectrum_hist_gershgorin_discrete_n6.csv").exists());
    assert!(out.join("spectrum_hist_gershgorin_discrete_n6.svg").exists());

    let metadata: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(metadata["base_seed"], 3);
    assert!(metadata["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!(metadata["config"]["experiment"] == "spectrum");

    let summary = std::fs::read_to_string(out.join("spectrum_summary.csv")).unwrap();
    assert!(summary.starts_with("scheme,n,trials,phi,frac_positive_real\n"));
    assert!(!summary.contains('\r'), "CSV must use LF line endings");
}

#[test]
fn rollout_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "rollout.json",
        r#"{
            "experiment": "rollout",
            "n": 4,
            "m": 30,
            "trials": 2,
            "schemes": [{"kind": "glorot_normal", "n": 4}]
        }"#,
    );
    let out = dir.path().join("out");
    let status = trainflow()
        .args(["rollout", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("rollout_summary.csv")).unwrap();
    assert!(summary.starts_with("scheme,n,seed,diverged,steps_taken,final_norm\n"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "spectrum.json",
        r#"{
            "experiment": "spectrum",
            "schemes": [{"kind": "glorot_normal", "n": 5}],
            "trials": 10
        }"#,
    );
    let run = |out: &Path, seed: &str| {
        let status = trainflow()
            .args(["spectrum", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("spectrum_summary.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"), "1");
    let b = run(&dir.path().join("b"), "1");
    let c = run(&dir.path().join("c"), "2");
    assert_eq!(a, b, "identical configs must give byte-identical CSV");
    assert_ne!(a, c, "different seeds must change the results");
}

#[test]
fn convergence_and_noise_bias_run_small() {
    let dir = tempfile::tempdir().unwrap();
    let conv = write_config(
        dir.path(),
        "conv.json",
        r#"{
            "experiment": "convergence",
            "trials": 5,
            "tau_grid": [1.0, 100.0],
            "sigma": 0.05
        }"#,
    );
    let out = dir.path().join("conv_out");
    assert!(trainflow()
        .args(["convergence", "--config"])
        .arg(&conv)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(text.starts_with("run,tau,direction_id,measure,value\n"));
    // 2 runs x 2 taus x 3 directions x 2 measures.
    assert_eq!(text.lines().count(), 1 + 24);

    let bias = write_config(
        dir.path(),
        "bias.json",
        r#"{
            "experiment": "noise_bias",
            "n": 3,
            "r": 2,
            "m": 30,
            "trials": 100
        }"#,
    );
    let out = dir.path().join("bias_out");
    assert!(trainflow()
        .args(["noise-bias", "--config"])
        .arg(&bias)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(out.join("noise_bias.csv")).unwrap();
    assert!(text.starts_with(
        "sigma,direction,empirical_mean_factor,predicted_factor,empirical_additive,predicted_additive,stderr\n"
    ));
}

#[test]
fn remedies_subcommand_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "remedies.json",
        r#"{
            "experiment": "remedies",
            "n": 4,
            "r": 2,
            "m": 24,
            "trials": 3
        }"#,
    );
    let out = dir.path().join("out");
    assert!(trainflow()
        .args(["remedies", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(out.join("remedies.csv")).unwrap();
    assert!(text.starts_with("arm,seed,spectral_radius_learned,rollout_diverged,learnable_error\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 5);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown field.
    let bad_field = write_config(
        dir.path(),
        "bad_field.json",
        r#"{"experiment": "spectrum", "bogus": true}"#,
    );
    let status = trainflow()
        .args(["spectrum", "--config"])
        .arg(&bad_field)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Subcommand / config mismatch.
    let mismatched = write_config(dir.path(), "mismatch.json", r#"{"experiment": "spectrum"}"#);
    let status = trainflow()
        .args(["remedies", "--config"])
        .arg(&mismatched)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Invalid parameter combination.
    let invalid = write_config(
        dir.path(),
        "invalid.json",
        r#"{"experiment": "remedies", "n": 3, "r": 3}"#,
    );
    let status = trainflow()
        .args(["remedies", "--config"])
        .arg(&invalid)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_errors_map_to_exit_code_3() {
    use trainflow::Error;
    assert_eq!(Error::SingularData { smallest: 0.0, largest: 1.0 }.exit_code(), 3);
    assert_eq!(Error::Divergence { step: 5, loss: 1e13 }.exit_code(), 3);
    assert_eq!(Error::Config("x".into()).exit_code(), 2);
}
