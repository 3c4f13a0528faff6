//! End-to-end command-line checks: format round trips, exit codes,
//! deterministic outputs, and the documented help surface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surreptix::{spg, srpx, wav};
use surreptix_core::dsp::stft;
use surreptix_core::pipeline::{PipelineKind, PipelineModel};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_surreptix"))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawning surreptix")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// One tiny corpus + untrained model shared by the CLI tests.
fn setup(dir: &Path) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    let out = run(&[
        "gen-data",
        "--speakers",
        "2",
        "--utts",
        "5",
        "--out",
        corpus.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_code(&out, 0);
    let model_path = dir.join("model.srpx");
    let model = PipelineModel::build(PipelineKind::Sbp, 2, 1).unwrap();
    srpx::save_model(&model_path, &model).unwrap();
    (corpus, model_path)
}

#[test]
fn usage_errors_exit_one_runtime_errors_exit_two() {
    let out = run(&["attack", "--bogus-flag"]);
    assert_code(&out, 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus-flag"), "{err}");

    let out = run(&["train", "--pipeline", "sbp", "--data", "/nonexistent", "--out", "/tmp/x.srpx", "--seed", "1"]);
    assert_code(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nonexistent"), "{err}");
}

#[test]
fn help_documents_every_flag() {
    for (cmd, flags) in [
        ("gen-data", vec!["--speakers", "--utts", "--out", "--seed", "--duration-s"]),
        ("train", vec!["--pipeline", "--data", "--out", "--seed", "--epochs", "--lr", "--batch", "--optimizer"]),
        (
            "attack",
            vec![
                "--attack", "--model", "--surrogate", "--eps", "--lambda", "--iters", "--in",
                "--out", "--report", "--seed", "--tap", "--guide", "--band", "--freqs",
                "--amplitude", "--keep-fraction", "--target", "--target-set",
                "--no-wav-roundtrip", "--plateau-patience",
            ],
        ),
        ("detect", vec!["--controls", "--in", "--model", "--report", "--seed", "--reference", "--calibrate-data"]),
        ("sweep", vec!["--spec", "--out", "--seed"]),
        ("invert", vec!["--spec-in", "--iters", "--out", "--seed"]),
        ("distill", vec!["--teacher", "--student-arch", "--temp", "--weight", "--data", "--out", "--seed", "--epochs"]),
    ] {
        let out = run(&[cmd, "--help"]);
        assert_code(&out, 0);
        let text = String::from_utf8_lossy(&out.stdout);
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help is missing {flag}");
        }
    }
}

#[test]
fn fgsm_epsilon_zero_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, model) = setup(dir.path());
    let input = corpus.join("0.wav");
    let out_path = dir.path().join("adv.wav");
    let report = dir.path().join("report.csv");
    let out = run(&[
        "attack",
        "--attack",
        "fgsm",
        "--model",
        model.to_str().unwrap(),
        "--eps",
        "0",
        "--in",
        input.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_code(&out, 0);
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out_path).unwrap());
    let report = std::fs::read_to_string(&report).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "attack,epsilon,lambda,iterations,success,clean_pred,adv_pred,distortion_stage3,distortion_stage1"
    );
    assert!(lines.next().unwrap().contains("false"), "{report}");
}

#[test]
fn stage1_pgd_artifact_is_flagged_by_hermitian_control() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, model_path) = setup(dir.path());
    // make a stage-1 object from a corpus sample
    let wave = wav::read_wav(&corpus.join("1.wav")).unwrap();
    let model = srpx::load_model(&model_path).unwrap();
    let spec = stft(&wave, &model.stft).unwrap();
    let spec_path = dir.path().join("clean.spg");
    spg::write_spg(&spec_path, &spec).unwrap();

    let adv_path = dir.path().join("adv.spg");
    let out = run(&[
        "attack",
        "--attack",
        "pgd",
        "--model",
        model_path.to_str().unwrap(),
        "--eps",
        "1e-3",
        "--iters",
        "10",
        "--in",
        spec_path.to_str().unwrap(),
        "--out",
        adv_path.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_code(&out, 0);

    let report = dir.path().join("detect.csv");
    let out = run(&[
        "detect",
        "--controls",
        "hermitian",
        "--in",
        adv_path.to_str().unwrap(),
        "--model",
        model_path.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "detector,score,threshold,verdict,sample_id");
    let row = lines.next().unwrap();
    assert!(row.starts_with("hermitian,") && row.contains(",flagged,"), "{row}");

    // the clean spectrogram stays clean
    let report2 = dir.path().join("detect_clean.csv");
    let out = run(&[
        "detect",
        "--controls",
        "hermitian",
        "--in",
        spec_path.to_str().unwrap(),
        "--model",
        model_path.to_str().unwrap(),
        "--report",
        report2.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&report2).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",clean,"), "{text}");
}

#[test]
fn invert_writes_playable_wav() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, model_path) = setup(dir.path());
    let wave = wav::read_wav(&corpus.join("2.wav")).unwrap();
    let model = srpx::load_model(&model_path).unwrap();
    let spec_path = dir.path().join("s.spg");
    spg::write_spg(&spec_path, &stft(&wave, &model.stft).unwrap()).unwrap();
    let out_path = dir.path().join("inv.wav");
    let out = run(&[
        "invert",
        "--spec-in",
        spec_path.to_str().unwrap(),
        "--iters",
        "5",
        "--out",
        out_path.to_str().unwrap(),
        "--seed",
        "6",
    ]);
    assert_code(&out, 0);
    let inv = wav::read_wav(&out_path).unwrap();
    assert!(inv.len() > 15_000 && inv.samples.iter().all(|v| v.is_finite()));
}

#[test]
fn sweep_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, model_path) = setup(dir.path());
    let spec = serde_json::json!({
        "attack": "fgsm",
        "model": model_path.to_str().unwrap(),
        "data": corpus.to_str().unwrap(),
        "eps_grid": [0.0, 1e-3],
        "iterations": [1],
        "samples": 2,
        "detectors": ["hermitian", "nyquist"],
    });
    let spec_path = dir.path().join("sweep.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let (out1, out2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out_path in [&out1, &out2] {
        let out = run(&[
            "sweep",
            "--spec",
            spec_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert_code(&out, 0);
    }
    let (a, b) = (std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    assert_eq!(a, b, "sweep reruns differ");
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], surreptix::sweep::SWEEP_CSV_HEADER);
    // header + 2 eps x 2 samples + 2 aggregate rows
    assert_eq!(lines.len(), 1 + 4 + 2, "{text}");
    // eps 0 rows keep the clean prediction
    for line in &lines[1..3] {
        assert!(line.starts_with("sample,fgsm,sbp,0,"), "{line}");
        assert!(line.contains(",false,"), "{line}");
    }
}

#[test]
fn sweep_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, model_path) = setup(dir.path());
    // empty eps grid
    let spec = serde_json::json!({
        "attack": "fgsm",
        "model": model_path.to_str().unwrap(),
        "data": corpus.to_str().unwrap(),
        "eps_grid": [],
        "samples": 1,
    });
    let spec_path = dir.path().join("bad.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = run(&["sweep", "--spec", spec_path.to_str().unwrap(), "--out", "/tmp/x.csv", "--seed", "1"]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps_grid"));

    // unknown keys are schema violations
    let spec = serde_json::json!({
        "attack": "fgsm",
        "model": model_path.to_str().unwrap(),
        "data": corpus.to_str().unwrap(),
        "eps_grid": [1e-3],
        "samples": 1,
        "no_such_key": 1,
    });
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = run(&["sweep", "--spec", spec_path.to_str().unwrap(), "--out", "/tmp/x.csv", "--seed", "1"]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    // missing model file
    let spec = serde_json::json!({
        "attack": "fgsm",
        "model": dir.path().join("missing.srpx").to_str().unwrap(),
        "data": corpus.to_str().unwrap(),
        "eps_grid": [1e-3],
        "samples": 1,
    });
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = run(&["sweep", "--spec", spec_path.to_str().unwrap(), "--out", "/tmp/x.csv", "--seed", "1"]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing model file"));
}

#[test]
fn gen_data_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = run(&[
            "gen-data",
            "--speakers",
            "2",
            "--utts",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        assert_code(&out, 0);
    }
    for name in ["manifest.txt", "0.wav", "3.wav"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}
