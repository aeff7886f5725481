use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_margin-audit"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path) -> String {
    let o = run(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--n",
        "600",
        "--seed",
        "3",
        "--prevalence",
        "0.05",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("config.json").to_str().unwrap().to_string()
}

#[test]
fn stages_refuse_missing_prerequisites() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(&dir.path().join("data"));
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = run(&["--config", &cfg, "--out", out, "audit"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run detect first"), "{}", stderr(&o));

    assert_eq!(code(&run(&["--config", &cfg, "--out", out, "ingest"])), 0);
    assert_eq!(code(&run(&["--config", &cfg, "--out", out, "score"])), 0);
    let o = run(&["--config", &cfg, "--out", out, "detect"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run embed first"), "{}", stderr(&o));

    let o = run(&["--config", &cfg, "--out", out, "detect", "--space", "demographic"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["--config", &cfg, "--out", out, "report"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run audit first"), "{}", stderr(&o));
    for stage in ["audit", "sweep", "report"] {
        let o = run(&["--config", &cfg, "--out", out, stage]);
        assert_eq!(code(&o), 0, "{stage}: {}", stderr(&o));
    }
    let report = fs::read_to_string(Path::new(out).join("report.md")).unwrap();
    assert!(report.contains("Demographic outliers"));
    assert!(!report.contains("Text outliers"));
}

#[test]
fn changed_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(&dir.path().join("data"));
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(code(&run(&["--config", &cfg, "--out", out, "ingest"])), 0);

    let o = run(&["--config", &cfg, "--out", out, "--seed", "99", "score"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("different configuration"), "{}", stderr(&o));

    // Tampering with an artifact is caught too.
    fs::write(Path::new(out).join("dataset.csv"), "id\n").unwrap();
    let o = run(&["--config", &cfg, "--out", out, "score"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    assert_eq!(code(&run(&["--out", out, "ingest"])), 2);
    assert_eq!(
        code(&run(&["--config", "/no/such/config.json", "--out", out, "ingest"])),
        2
    );

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dataset": "missing.csv", "seed": 1}"#).unwrap();
    let o = run(&["--config", bad.to_str().unwrap(), "--out", out, "ingest"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not exist"));

    fs::write(&bad, r#"{"dataset": "missing.csv", "seed": 1, "colour": 2}"#).unwrap();
    assert_eq!(
        code(&run(&["--config", bad.to_str().unwrap(), "--out", out, "ingest"])),
        2
    );

    let cfg = synth(&dir.path().join("data"));
    assert_eq!(
        code(&run(&["--config", &cfg, "--out", out, "--threads", "0", "run"])),
        2
    );
    let o = run(&["synth", "--out", out, "--planted-group", "martian"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(&dir.path().join("data"));
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in [
        "dataset.csv",
        "embeddings.bin",
        "scored.csv",
        "outliers.csv",
        "audit.json",
        "sweep.json",
        "report.md",
        "tables/percentiles.csv",
        "plots/composition_demographic.csv",
        "report.manifest.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let audit: serde_json::Value = serde_json::from_slice(&fs::read(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["seed"], 3);
    assert_eq!(audit["outliers"].as_object().unwrap().len(), 3);
}
