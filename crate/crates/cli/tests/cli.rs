//! End-to-end checks of the command-line surface: exit codes, artifact
//! shapes, and the provenance sidecars.

use std::path::Path;
use std::process::Command;

fn goreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_goreg"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn unknown_config_key_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("goreg.toml");
    std::fs::write(&cfg, "grid_points = 50\nnot_a_real_key = 1\n").unwrap();
    let out = goreg()
        .args(["--config", cfg.to_str().unwrap(), "synth", "--out"])
        .arg(dir.path().join("s.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn bad_penalty_name_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let subjects = dir.path().join("s.jsonl");
    let status = goreg()
        .args(["synth", "--seed", "3", "--out", subjects.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let out = goreg()
        .args([
            "--penalty",
            "ridge",
            "cv",
            "--subjects",
            subjects.to_str().unwrap(),
            "--model",
            "mean",
            "--out",
        ])
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_files_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = goreg()
        .args(["ingest", "--input", "nope.csv", "--outcomes", "also-nope.csv", "--out"])
        .arg(dir.path().join("s.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("bad.bin");
    std::fs::write(&design, b"this is not a design container").unwrap();
    let out = goreg()
        .args(["fit", "--design", design.to_str().unwrap(), "--out"])
        .arg(dir.path().join("f.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_features_fit_pipeline_produces_artifacts_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let subjects = dir.path().join("s.jsonl");
    let design = dir.path().join("design.bin");
    let fit = dir.path().join("fit.json");

    assert!(goreg()
        .args(["synth", "--seed", "5", "--out", subjects.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    assert!(goreg()
        .args([
            "features",
            "--subjects",
            subjects.to_str().unwrap(),
            "--index",
            "2",
            "--out",
            design.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    assert!(goreg()
        .args([
            "--lambda",
            "0.05",
            "fit",
            "--design",
            design.to_str().unwrap(),
            "--out",
            fit.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());

    let artifact: serde_json::Value = serde_json::from_str(&read(&fit)).unwrap();
    assert_eq!(artifact["fit"]["lambda_used"], 0.05);
    assert!(artifact["fit"]["convergence"]["converged"].as_bool().unwrap());
    // the fit artifact embeds its provenance
    assert_eq!(artifact["provenance"]["config_hash"].as_str().unwrap().len(), 64);

    // binary artifacts get a sha256 provenance sidecar
    let sidecar = design.with_file_name("design.bin.provenance.json");
    let p: serde_json::Value = serde_json::from_str(&read(&sidecar)).unwrap();
    assert_eq!(p["config_hash"].as_str().unwrap().len(), 64);
    for input in p["inputs"].as_array().unwrap() {
        assert_eq!(input["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn plotdata_density_is_figure_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let subjects = dir.path().join("s.jsonl");
    assert!(goreg()
        .args(["synth", "--seed", "9", "--out", subjects.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let csv_path = dir.path().join("density.csv");
    assert!(goreg()
        .args([
            "plotdata",
            "--subjects",
            subjects.to_str().unwrap(),
            "--kind",
            "density",
            "--out",
            csv_path.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let text = read(&csv_path);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("subject_id"));
    assert!(lines.next().is_some());
}

#[test]
fn flag_overrides_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("goreg.toml");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    // same config file, different --seed: outputs must differ
    for (path, seed) in [(&a, "1"), (&b, "2")] {
        assert!(goreg()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "synth",
                "--out",
                path.to_str().unwrap(),
            ])
            .status()
            .unwrap()
            .success());
    }
    assert_ne!(read(&a), read(&b));
    // and --seed 1 must reproduce the config-only run exactly
    let c = dir.path().join("c.jsonl");
    assert!(goreg()
        .args(["--config", cfg.to_str().unwrap(), "synth", "--out", c.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    assert_eq!(read(&a), read(&c));
}
