//! End-to-end CLI behavior: exit codes, artifacts, determinism, resume.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfimos::wav::{write_wav, WavEncoding};
use sfimos_core::signal::bandlimited_noise;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sfimos"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sfimos")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Tiny model config used by the CLI tests.
const TINY_CONFIG: &str = "dim=8\nrff_features=8\nnaf_hidden=16\nkd_epochs=2\nbatch_kd=32\n\
                           crop_seconds=0.4\nmos_epochs=2\nlr=0.001\nseed=5\n";

fn write_tiny_manifest(dir: &Path, systems: usize) -> PathBuf {
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).unwrap();
    let mut manifest = String::from("wav_path,system_id,listener_id,score,sample_rate_hz\n");
    for s in 0..systems {
        for u in 0..2 {
            let name = format!("wav/s{s:02}_{u}.wav");
            let w = bandlimited_noise(0.5, 3000.0, 16_000, (s * 10 + u) as u64).unwrap();
            write_wav(dir.join(&name), &w, WavEncoding::Pcm16).unwrap();
            for listener in 0..3 {
                manifest.push_str(&format!("{name},s{s:02},{listener},3.0,16000\n"));
            }
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn bad_arguments_exit_2() {
    let out = run(&["predict", "--nonsense"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_refuses_non_empty_dir_without_force() {
    let dir = tempdir().unwrap();
    std::fs::write(dir.path().join("occupied.txt"), "x").unwrap();
    let out = run(&["gen-synthetic", "--out", dir.path().to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("--force"));
}

#[test]
fn gen_is_byte_deterministic_per_seed() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    assert_eq!(code(&run(&["gen-synthetic", "--out", a.path().to_str().unwrap(), "--seed", "3"])), 0);
    assert_eq!(code(&run(&["gen-synthetic", "--out", b.path().to_str().unwrap(), "--seed", "3"])), 0);
    let ma = std::fs::read(a.path().join("manifest.csv")).unwrap();
    let mb = std::fs::read(b.path().join("manifest.csv")).unwrap();
    assert_eq!(ma, mb);
    let wa = std::fs::read(a.path().join("wav/s07_004.wav")).unwrap();
    let wb = std::fs::read(b.path().join("wav/s07_004.wav")).unwrap();
    assert_eq!(wa, wb);
    let sa = std::fs::read(a.path().join("systems.csv")).unwrap();
    let sb = std::fs::read(b.path().join("systems.csv")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn distill_with_missing_teacher_exits_2() {
    let dir = tempdir().unwrap();
    write_tiny_manifest(dir.path(), 2);
    let cfg = dir.path().join("config.txt");
    std::fs::write(&cfg, TINY_CONFIG).unwrap();
    let out = run(&[
        "distill",
        "--data",
        dir.path().to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("kd").to_str().unwrap(),
        "--teacher",
        dir.path().join("missing.bin").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("teacher"));
}

#[test]
fn distill_writes_loss_rows_and_resume_continues() {
    let dir = tempdir().unwrap();
    write_tiny_manifest(dir.path(), 2);
    let cfg = dir.path().join("config.txt");
    std::fs::write(&cfg, TINY_CONFIG).unwrap();
    let kd = dir.path().join("kd");
    let out = run(&[
        "distill",
        "--data",
        dir.path().to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        kd.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(kd.join("kd_loss.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3, "header + 2 epochs: {csv}");
    assert!(rows[1].starts_with("1,"));
    assert!(rows[2].starts_with("2,"));
    assert!(kd.join("student.bin").exists());
    assert!(kd.join("teacher.bin").exists());
    assert!(kd.join("config.txt").exists());

    // resume continues epoch numbering and the optimizer step count
    let out = run(&[
        "distill",
        "--data",
        dir.path().to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        kd.to_str().unwrap(),
        "--teacher",
        kd.join("teacher.bin").to_str().unwrap(),
        "--resume",
        kd.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(kd.join("kd_loss.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 5, "header + 4 epochs: {csv}");
    assert!(rows[3].starts_with("3,"));
    assert!(rows[4].starts_with("4,"));

    let state = sfimos::ckpt::load_entries(kd.join("state.bin")).unwrap();
    let epochs = sfimos_core::checkpoint::find(&state, "trainer/epochs").unwrap();
    assert_eq!(epochs.data()[0], 4.0);
    let any_step = state
        .iter()
        .find(|(n, _)| n.ends_with(".step"))
        .map(|(_, t)| t.data()[0])
        .unwrap();
    assert!(any_step >= 2.0, "optimizer steps continue: {any_step}");
}

#[test]
fn train_mos_with_one_system_exits_2() {
    let dir = tempdir().unwrap();
    let manifest = write_tiny_manifest(dir.path(), 1);
    let out = run(&[
        "train-mos",
        "--data",
        manifest.to_str().unwrap(),
        "--out",
        dir.path().join("mos").to_str().unwrap(),
        "--set",
        "frontend=baseline",
        "--set",
        "dim=8",
        "--set",
        "rff_features=8",
        "--set",
        "naf_hidden=16",
        "--set",
        "mos_epochs=1",
        "--set",
        "num_listeners=3",
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("folds"));
}

#[test]
fn train_mos_fold_count_controls_checkpoints() {
    let dir = tempdir().unwrap();
    let manifest = write_tiny_manifest(dir.path(), 4);
    let out = run(&[
        "train-mos",
        "--data",
        manifest.to_str().unwrap(),
        "--out",
        dir.path().join("mos").to_str().unwrap(),
        "--folds",
        "3",
        "--set",
        "frontend=baseline",
        "--set",
        "dim=8",
        "--set",
        "rff_features=8",
        "--set",
        "naf_hidden=16",
        "--set",
        "mos_epochs=2",
        "--set",
        "num_listeners=3",
        "--set",
        "lr=0.001",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    for f in 0..3 {
        assert!(dir.path().join(format!("mos/fold{f}.bin")).exists());
        let csv =
            std::fs::read_to_string(dir.path().join(format!("mos/fold{f}_loss.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3, "header + 2 epochs");
        assert!(csv.starts_with("epoch,train_loss,val_loss\n"));
    }
    assert!(!dir.path().join("mos/fold3.bin").exists());
    assert!(dir.path().join("mos/config.txt").exists());

    // predict on the trained dir prints a value in [1, 5]
    let wav = dir.path().join("wav/s00_0.wav");
    let out = run(&[
        "predict",
        "--models",
        dir.path().join("mos").to_str().unwrap(),
        "--wav",
        wav.to_str().unwrap(),
        "--listeners",
        "0..2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let printed: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((1.0..=5.0).contains(&printed));

    // verbose adds one line per fold before the ensemble value
    let out = run(&[
        "predict",
        "--models",
        dir.path().join("mos").to_str().unwrap(),
        "--wav",
        wav.to_str().unwrap(),
        "--verbose",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("fold0:"));
}

#[test]
fn evaluate_joins_by_id_and_reports_unmatched() {
    let dir = tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "wav_path,system_id,listener_id,score,sample_rate_hz\n\
         wav/a.wav,s00,0,3.0,16000\n\
         wav/a.wav,s00,1,4.0,16000\n\
         wav/b.wav,s01,0,2.0,16000\n\
         wav/c.wav,s01,1,4.5,16000\n",
    )
    .unwrap();

    // predictions equal to truth, rows shuffled: join is by id
    let pred = dir.path().join("pred.csv");
    std::fs::write(&pred, "utterance_id,pred\nwav/c.wav,4.5\nwav/a.wav,3.5\nwav/b.wav,2.0\n")
        .unwrap();
    let out = run(&[
        "evaluate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("utterance.mse=0\n"), "{text}");
    assert!(text.contains("utterance.srcc=1\n"));
    assert!(text.contains("system.lcc=1\n"));

    // unmatched ids exit 1, listing them
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "utterance_id,pred\nwav/a.wav,3.5\nwav/zzz.wav,2.0\n").unwrap();
    let out = run(&[
        "evaluate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--pred",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.contains("wav/zzz.wav"), "{err}");
    assert!(err.contains("wav/b.wav"), "{err}");
}

#[test]
fn evaluate_report_files_match_stdout() {
    let dir = tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "wav_path,system_id,listener_id,score,sample_rate_hz\n\
         wav/a.wav,s00,0,3.0,16000\n\
         wav/b.wav,s01,0,2.0,16000\n\
         wav/c.wav,s02,0,4.0,16000\n",
    )
    .unwrap();
    let pred = dir.path().join("pred.csv");
    std::fs::write(&pred, "utterance_id,pred\nwav/a.wav,2.9\nwav/b.wav,2.2\nwav/c.wav,3.8\n")
        .unwrap();
    let report_dir = dir.path().join("report");
    let out = run(&[
        "evaluate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let stdout_text = String::from_utf8_lossy(&out.stdout).into_owned();
    let file_text = std::fs::read_to_string(report_dir.join("report.txt")).unwrap();
    assert_eq!(stdout_text, file_text);
    let csv = std::fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("level,metric,value\n"));
    assert_eq!(csv.lines().count(), 9);
}
