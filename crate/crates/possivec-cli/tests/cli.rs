//! End-to-end tests of the command-line surface.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_possivec"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("reading {rel}: {e}"))
}

fn gen_small(dir: &Path, out: &str) {
    let status = run_in(
        dir,
        &[
            "gen",
            "--seed",
            "7",
            "--out",
            out,
            "--per-task",
            "3",
            "--duration-min",
            "120",
            "--duration-max",
            "200",
        ],
    );
    assert_ok(&status);
}

#[test]
fn gen_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["d1", "d2"] {
        assert_ok(&run_in(
            dir.path(),
            &["gen", "--seed", "42", "--out", out, "--per-task", "3"],
        ));
    }
    let mut names: Vec<String> = fs::read_dir(dir.path().join("d1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(names.len() > 10);
    for name in names {
        assert_eq!(
            read(dir.path(), &format!("d1/{name}")),
            read(dir.path(), &format!("d2/{name}")),
            "{name} differs between identical gen runs"
        );
    }
}

#[test]
fn gen_scales_with_per_task() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run_in(
        dir.path(),
        &["gen", "--seed", "1", "--out", "d", "--per-task", "5"],
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "d/manifest.json")).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 15);

    // Default scale: 17 per class, 51 in total.
    assert_ok(&run_in(dir.path(), &["gen", "--seed", "1", "--out", "full"]));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "full/manifest.json")).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 51);
}

#[test]
fn fold_failures_are_recorded_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d");
    // A fourth class whose only trajectory never touches a kernel: its
    // sequence is empty, so every fold either trains that class on nothing
    // or classifies an empty sequence. Failures are recorded, not fatal.
    let mut csv = String::from("t,x,y\n");
    for t in 0..30 {
        csv.push_str(&format!("{t},{},{}\n", t % 20, t % 9));
    }
    fs::write(dir.path().join("d/stray.csv"), csv).unwrap();
    let manifest_path = dir.path().join("d/manifest.json");
    let mut manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "d/manifest.json")).unwrap();
    manifest["entries"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"file": "stray.csv", "label": "STRAY"}));
    fs::write(&manifest_path, manifest.to_string()).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "loocv",
            "--model",
            "hmm",
            "--mode",
            "classical",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--out",
            "lo",
            "--n-states",
            "2",
            "--restarts",
            "1",
            "--hmm-max-iter",
            "5",
        ],
    );
    assert_eq!(out.status.code(), Some(1), "expected recorded-failure exit");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fold failure"), "stderr: {stderr}");
    // The report still exists and counts every sample.
    let report = read(dir.path(), "lo/report.csv");
    assert!(report.contains("STRAY,1,1,0.00"), "report:\n{report}");
}

#[test]
fn vectorize_degenerates_to_classical_files() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d");
    assert_ok(&run_in(
        dir.path(),
        &[
            "vectorize",
            "--mode",
            "classical",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--out",
            "classical.txt",
        ],
    ));
    assert_ok(&run_in(
        dir.path(),
        &[
            "vectorize",
            "--mode",
            "possibilistic",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--omega",
            "0",
            "--threshold",
            "1",
            "--out",
            "possibilistic.txt",
        ],
    ));
    assert_eq!(
        read(dir.path(), "classical.txt"),
        read(dir.path(), "possibilistic.txt")
    );
}

#[test]
fn vectorize_warns_on_empty_sequences_and_still_writes_the_line() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d");
    // A hand-written trajectory that never enters any built-in kernel.
    let mut csv = String::from("t,x,y\n");
    for t in 0..40 {
        csv.push_str(&format!("{t},{},{}\n", t % 30, 5 + t % 7));
    }
    fs::write(dir.path().join("d/offkernel.csv"), csv).unwrap();
    let manifest_path = dir.path().join("d/manifest.json");
    let mut manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "d/manifest.json")).unwrap();
    manifest["entries"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"file": "offkernel.csv", "label": "DEG2"}));
    fs::write(&manifest_path, manifest.to_string()).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "vectorize",
            "--mode",
            "classical",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--out",
            "seqs.txt",
        ],
    );
    assert_ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("warning") && stderr.contains("offkernel"),
        "missing warning, stderr: {stderr}"
    );
    let text = read(dir.path(), "seqs.txt");
    assert_eq!(text.lines().count(), 10);
    assert_eq!(text.lines().last().unwrap(), "DEG2\t");
}

#[test]
fn missing_layout_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d");
    let out = run_in(
        dir.path(),
        &[
            "vectorize",
            "--mode",
            "classical",
            "--layout",
            "nowhere.json",
            "--manifest",
            "d/manifest.json",
            "--out",
            "seqs.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("seqs.txt").exists());
}

#[test]
fn usage_errors_exit_2() {
    let out = bin().args(["loocv", "--model", "hmm"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_and_classify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d");
    assert_ok(&run_in(
        dir.path(),
        &[
            "vectorize",
            "--mode",
            "classical",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--out",
            "seqs.txt",
        ],
    ));
    assert_ok(&run_in(
        dir.path(),
        &[
            "train",
            "--model",
            "hmm",
            "--layout",
            "d/layout.json",
            "--seqs",
            "seqs.txt",
            "--out",
            "models",
            "--n-states",
            "2",
            "--restarts",
            "1",
        ],
    ));
    for class in ["DEG1", "DEG2", "INT"] {
        assert!(dir.path().join(format!("models/hmm_{class}.json")).exists());
    }
    assert_ok(&run_in(
        dir.path(),
        &[
            "classify",
            "--model",
            "hmm",
            "--models",
            "models",
            "--seqs",
            "seqs.txt",
            "--out",
            "pred.csv",
        ],
    ));
    let pred = read(dir.path(), "pred.csv");
    assert!(pred.starts_with("index,label,predicted\n"));
    assert_eq!(pred.lines().count(), 10);

    assert_ok(&run_in(
        dir.path(),
        &[
            "train",
            "--model",
            "crf",
            "--layout",
            "d/layout.json",
            "--seqs",
            "seqs.txt",
            "--out",
            "models-crf",
            "--crf-max-iter",
            "40",
        ],
    ));
    assert_ok(&run_in(
        dir.path(),
        &[
            "classify",
            "--model",
            "crf",
            "--models",
            "models-crf",
            "--seqs",
            "seqs.txt",
            "--out",
            "pred-crf.csv",
        ],
    ));
}

#[test]
fn loocv_report_shape_and_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d");
    let out = run_in(
        dir.path(),
        &[
            "loocv",
            "--model",
            "hmm",
            "--mode",
            "classical",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--out",
            "lo",
            "--n-states",
            "2",
            "--restarts",
            "1",
            "--hmm-max-iter",
            "6",
        ],
    );
    assert_ok(&out);
    let report = read(dir.path(), "lo/report.csv");
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "class,samples,errors,accuracy_pct");
    assert_eq!(lines.len(), 5); // three classes + TOTAL
    assert!(lines[4].starts_with("TOTAL,9,"));
    let confusion = read(dir.path(), "lo/confusion.csv");
    assert!(confusion.starts_with("true,predicted,count\n"));
    assert_eq!(confusion.lines().count(), 10); // header + 3x3

    // A 0:12:1 sweep yields thirteen data rows.
    let out = run_in(
        dir.path(),
        &[
            "sweep",
            "--model",
            "crf",
            "--layout",
            "d/layout.json",
            "--manifest",
            "d/manifest.json",
            "--omegas",
            "0:12:1",
            "--threshold",
            "1",
            "--out",
            "sw",
            "--crf-max-iter",
            "30",
        ],
    );
    assert_ok(&out);
    let sweep = read(dir.path(), "sw/sweep.csv");
    assert_eq!(sweep.lines().count(), 14); // header + 13 omegas
    assert!(sweep.starts_with("omega,accuracy_pct\n0,"));
}

#[test]
fn config_file_feeds_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.toml"),
        "[gen]\nper_task = 2\nduration_min = 120\nduration_max = 150\n",
    )
    .unwrap();
    assert_ok(&run_in(
        dir.path(),
        &[
            "--config",
            "cfg.toml",
            "gen",
            "--seed",
            "3",
            "--out",
            "a",
        ],
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "a/manifest.json")).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 6);

    // The explicit flag overrides the config value.
    assert_ok(&run_in(
        dir.path(),
        &[
            "--config",
            "cfg.toml",
            "gen",
            "--seed",
            "3",
            "--out",
            "b",
            "--per-task",
            "4",
        ],
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "b/manifest.json")).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 12);
}
