//! Implementations behind the CLI subcommands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sfimos_core::data::RatingRecord;
use sfimos_core::metrics::{evaluate_all, ScorePair};
use sfimos_core::models::{FoldModel, Frontend, StudentEncoder, TeacherEncoder};
use sfimos_core::models::{load_optimizer_state, optimizer_state_values, predict_mos, predict_mos_per_model};
use sfimos_core::nn::{Parameter, Tensor};
use sfimos_core::rng::sub_rng;
use sfimos_core::training::{cv_split, kd_train, mos_train, AudioStore, TrainError};
use sfimos_core::Waveform;

use crate::config::{FrontendKind, RunConfig};
use crate::manifest::{
    load_audio, load_manifest, load_predictions, resolve_wav_path, utterance_truth,
};
use crate::wav::read_wav;
use crate::{ckpt, runtime, stream, synth, usage, CmdResult};

fn apply_overrides(
    cfg: &mut RunConfig,
    sets: &[String],
    seed: Option<u64>,
) -> CmdResult<()> {
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got {s:?}")))?;
        cfg.set(key.trim(), value.trim(), 0)
            .map_err(|e| usage(e.to_string()))?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(())
}

fn write_resolved_config(out: &Path, cfg: &RunConfig) -> CmdResult<()> {
    std::fs::write(out.join("config.txt"), cfg.to_text())
        .map_err(|e| runtime(format!("cannot write config snapshot: {e}")))
}

fn ensure_out_dir(out: &Path) -> CmdResult<()> {
    std::fs::create_dir_all(out).map_err(|e| runtime(format!("cannot create {}: {e}", out.display())))
}

/// `gen-synthetic`: the track-shaped synthetic dataset.
pub fn gen_synthetic(out: &Path, seed: u64, force: bool) -> CmdResult<()> {
    if out.exists() {
        let non_empty = std::fs::read_dir(out)
            .map_err(|e| runtime(format!("cannot inspect {}: {e}", out.display())))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(usage(format!(
                "output directory {} is not empty (use --force to overwrite)",
                out.display()
            )));
        }
    }
    ensure_out_dir(out)?;
    synth::synth_dataset(out, seed).map_err(|e| runtime(e))?;
    println!("wrote synthetic dataset to {}", out.display());
    Ok(())
}

fn manifest_records(data: &Path) -> CmdResult<(PathBuf, Vec<RatingRecord>)> {
    let manifest_path = if data.is_dir() {
        data.join("manifest.csv")
    } else {
        data.to_path_buf()
    };
    let records = load_manifest(&manifest_path).map_err(|e| usage(e.to_string()))?;
    if records.is_empty() {
        return Err(usage(format!("{} has no ratings", manifest_path.display())));
    }
    Ok((manifest_path, records))
}

fn audio_store(manifest_path: &Path, records: &[RatingRecord]) -> CmdResult<AudioStore> {
    load_audio(manifest_path, records).map_err(|e| usage(e.to_string()))
}

pub struct DistillArgs {
    pub data: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
    pub teacher: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sets: Vec<String>,
}

/// `distill`: knowledge-distillation initialization of the SFI student.
pub fn distill(args: DistillArgs) -> CmdResult<()> {
    let mut cfg = RunConfig::from_file(&args.config).map_err(|e| usage(e.to_string()))?;
    apply_overrides(&mut cfg, &args.sets, args.seed)?;

    let (manifest_path, records) = manifest_records(&args.data)?;
    let unique: BTreeSet<&str> = records.iter().map(|r| r.wav_path.as_str()).collect();
    let mut dataset = Vec::with_capacity(unique.len());
    for path in unique {
        dataset.push(
            read_wav(resolve_wav_path(&manifest_path, path)).map_err(|e| usage(e.to_string()))?,
        );
    }

    ensure_out_dir(&args.out)?;
    let teacher = match &args.teacher {
        Some(path) => {
            if !path.exists() {
                return Err(usage(format!(
                    "teacher checkpoint {} does not exist",
                    path.display()
                )));
            }
            ckpt::load_teacher(path, &cfg).map_err(|e| usage(e.to_string()))?
        }
        None => {
            let teacher =
                TeacherEncoder::new(&cfg.encoder_config(), &mut sub_rng(cfg.seed, stream::TEACHER));
            ckpt::save_entries(args.out.join("teacher.bin"), &teacher.named_values())
                .map_err(|e| runtime(e))?;
            teacher
        }
    };

    let mut student = StudentEncoder::init_from_teacher(
        &teacher,
        &cfg.naf_config(),
        &mut sub_rng(cfg.seed, stream::STUDENT),
    );

    let mut epochs_done: usize = 0;
    if let Some(resume_dir) = &args.resume {
        let model_path = resume_dir.join("student.bin");
        let state_path = resume_dir.join("state.bin");
        if !model_path.exists() || !state_path.exists() {
            return Err(usage(format!(
                "cannot resume: {} or {} missing",
                model_path.display(),
                state_path.display()
            )));
        }
        let entries = ckpt::load_entries(&model_path).map_err(|e| usage(e.to_string()))?;
        student.load_named(&entries).map_err(|e| usage(e.to_string()))?;
        let state = ckpt::load_entries(&state_path).map_err(|e| usage(e.to_string()))?;
        let names = student.param_names();
        let mut params = student.params_mut();
        load_optimizer_state(&names, &mut params, &state).map_err(|e| usage(e.to_string()))?;
        epochs_done = sfimos_core::checkpoint::find(&state, "trainer/epochs")
            .map(|t| t.data()[0] as usize)
            .unwrap_or(0);
    }

    let mut train_cfg = cfg.train_config();
    // a resumed run must not replay the original draw sequence
    train_cfg.seed = cfg.seed.wrapping_add(epochs_done as u64);
    let report = kd_train(&dataset, &teacher, &mut student, &train_cfg)
        .map_err(map_train_error)?;

    ckpt::save_entries(args.out.join("student.bin"), &student.named_values())
        .map_err(|e| runtime(e))?;

    let names = student.param_names();
    let params = student.params_mut();
    let param_refs: Vec<&Parameter> = params.iter().map(|p| &**p).collect();
    let mut state = optimizer_state_values(&names, &param_refs);
    state.push((
        "trainer/epochs".to_string(),
        Tensor::scalar((epochs_done + report.history.len()) as f64),
    ));
    ckpt::save_entries(args.out.join("state.bin"), &state).map_err(|e| runtime(e))?;

    let csv_path = args.out.join("kd_loss.csv");
    let mut csv = if args.resume.is_some() && csv_path.exists() {
        std::fs::read_to_string(&csv_path).map_err(|e| runtime(e))?
    } else {
        String::from("epoch,mean_loss\n")
    };
    for e in &report.history {
        let _ = writeln!(csv, "{},{}", epochs_done + e.epoch, e.mean_loss);
    }
    std::fs::write(&csv_path, csv).map_err(|e| runtime(e))?;
    write_resolved_config(&args.out, &cfg)?;

    let first = report.history.first().map(|e| e.mean_loss).unwrap_or(0.0);
    let last = report.history.last().map(|e| e.mean_loss).unwrap_or(0.0);
    println!(
        "distilled {} epochs ({} steps): mean loss {first:.6} -> {last:.6}",
        report.history.len(),
        report.steps
    );
    Ok(())
}

fn map_train_error(e: TrainError) -> crate::CmdError {
    match e {
        TrainError::EmptyDataset
        | TrainError::InvalidFoldCount(_)
        | TrainError::TooFewSystems { .. }
        | TrainError::InvalidConfig(_)
        | TrainError::ScoreOutOfRange(_)
        | TrainError::UnknownListener { .. }
        | TrainError::MissingAudio(_) => usage(e.to_string()),
        other => runtime(other),
    }
}

pub struct TrainMosArgs {
    pub data: PathBuf,
    pub init: Option<PathBuf>,
    pub folds: Option<usize>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sets: Vec<String>,
}

/// `train-mos`: cross-validated MOS fine-tuning, one checkpoint per fold.
pub fn train_mos(args: TrainMosArgs) -> CmdResult<()> {
    // config precedence: explicit flag, then the init checkpoint's run dir
    let config_path = args.config.clone().or_else(|| {
        args.init
            .as_ref()
            .and_then(|p| p.parent().map(|d| d.join("config.txt")))
            .filter(|p| p.exists())
    });
    let mut cfg = match &config_path {
        Some(path) => RunConfig::from_file(path).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(folds) = args.folds {
        cfg.folds = folds;
    }
    apply_overrides(&mut cfg, &args.sets, args.seed)?;

    let (manifest_path, records) = manifest_records(&args.data)?;
    let audio = audio_store(&manifest_path, &records)?;

    let mut base = ckpt::fold_model_skeleton(&cfg);
    match (&cfg.frontend, &args.init) {
        (FrontendKind::Sfi, Some(init)) => {
            if !init.exists() {
                return Err(usage(format!("init checkpoint {} does not exist", init.display())));
            }
            let student = ckpt::load_student(init, &cfg).map_err(|e| usage(e.to_string()))?;
            base.frontend = Frontend::Sfi(student);
        }
        (FrontendKind::Sfi, None) => {
            return Err(usage(
                "--init is required for the sfi frontend (student checkpoint from distill)",
            ));
        }
        (FrontendKind::Baseline, Some(init)) => {
            let teacher = ckpt::load_teacher(init, &cfg).map_err(|e| usage(e.to_string()))?;
            if let Frontend::Baseline { encoder, .. } = &mut base.frontend {
                *encoder = teacher;
            }
        }
        (FrontendKind::Baseline, None) => {}
    }

    ensure_out_dir(&args.out)?;
    let train_cfg = cfg.train_config();

    if let Some(pretrain) = &cfg.pretrain_manifest {
        let (pre_path, pre_records) = manifest_records(Path::new(pretrain))?;
        let pre_audio = audio_store(&pre_path, &pre_records)?;
        let systems: BTreeSet<&str> = pre_records.iter().map(|r| r.system_id.as_str()).collect();
        let (pre_train, pre_val) = if systems.len() >= 2 {
            let k = systems.len().min(5);
            cv_split(&pre_records, k, cfg.seed)
                .map_err(map_train_error)?
                .swap_remove(0)
        } else {
            (pre_records.clone(), Vec::new())
        };
        let report = mos_train(
            &pre_train,
            &pre_val,
            &pre_audio,
            &mut base.frontend,
            &mut base.head,
            &train_cfg,
            cfg.batch_pretrain,
            true,
            cfg.seed.wrapping_add(usize::MAX as u64 / 2),
        )
        .map_err(map_train_error)?;
        println!(
            "pretrained on {} ratings, best epoch {}",
            pre_train.len(),
            report.best_epoch
        );
    }

    let folds = cv_split(&records, cfg.folds, cfg.seed).map_err(map_train_error)?;
    for (f, (train, val)) in folds.iter().enumerate() {
        let mut model = base.clone();
        let report = mos_train(
            train,
            val,
            &audio,
            &mut model.frontend,
            &mut model.head,
            &train_cfg,
            cfg.batch_final,
            true,
            cfg.seed.wrapping_add(1 + f as u64),
        )
        .map_err(map_train_error)?;

        ckpt::save_entries(args.out.join(format!("fold{f}.bin")), &model.named_values())
            .map_err(|e| runtime(e))?;
        let mut csv = String::from("epoch,train_loss,val_loss\n");
        for e in &report.history {
            let _ = writeln!(csv, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
        }
        std::fs::write(args.out.join(format!("fold{f}_loss.csv")), csv)
            .map_err(|e| runtime(e))?;
        println!(
            "fold {f}: {} train / {} val ratings, best epoch {}",
            train.len(),
            val.len(),
            report.best_epoch
        );
    }
    write_resolved_config(&args.out, &cfg)?;
    Ok(())
}

/// Parses `--listeners`: either `a..b` (inclusive) or a comma list.
pub fn parse_listeners(spec: &str) -> CmdResult<Vec<usize>> {
    let parse_id = |s: &str| -> CmdResult<usize> {
        s.trim()
            .parse()
            .map_err(|_| usage(format!("bad listener id {s:?}")))
    };
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (parse_id(a)?, parse_id(b)?);
        if b < a {
            return Err(usage(format!("empty listener range {spec:?}")));
        }
        Ok((a..=b).collect())
    } else {
        spec.split(',').map(parse_id).collect()
    }
}

/// Fold checkpoints in a models directory, ordered by fold number.
pub fn fold_checkpoints(models_dir: &Path) -> CmdResult<Vec<PathBuf>> {
    let mut folds = Vec::new();
    let entries = std::fs::read_dir(models_dir)
        .map_err(|e| usage(format!("cannot read {}: {e}", models_dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| runtime(e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(num) = name
            .strip_prefix("fold")
            .and_then(|s| s.strip_suffix(".bin"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            folds.push((num, entry.path()));
        }
    }
    if folds.is_empty() {
        return Err(usage(format!(
            "no fold checkpoints (fold*.bin) found in {}",
            models_dir.display()
        )));
    }
    folds.sort();
    Ok(folds.into_iter().map(|(_, p)| p).collect())
}

pub struct PredictArgs {
    pub models: PathBuf,
    pub wav: PathBuf,
    pub listeners: Option<String>,
    pub verbose: bool,
}

/// `predict`: ensemble MOS for one waveform. Returns the printed value.
pub fn predict(args: PredictArgs) -> CmdResult<f64> {
    let cfg = RunConfig::from_file(args.models.join("config.txt"))
        .map_err(|e| usage(e.to_string()))?;
    let mut models = Vec::new();
    for path in fold_checkpoints(&args.models)? {
        models.push(ckpt::load_fold_model(&path, &cfg).map_err(|e| usage(e.to_string()))?);
    }
    let listeners = match &args.listeners {
        Some(spec) => parse_listeners(spec)?,
        None => (0..cfg.num_listeners).collect(),
    };
    if let Some(&bad) = listeners.iter().find(|&&l| l >= cfg.num_listeners) {
        return Err(usage(format!(
            "listener {bad} out of range (model has {})",
            cfg.num_listeners
        )));
    }
    let x = read_wav(&args.wav).map_err(|e| usage(e.to_string()))?;

    if args.verbose {
        let per_model = predict_mos_per_model(&x, &models, &listeners).map_err(|e| runtime(e))?;
        for (i, m) in per_model.iter().enumerate() {
            println!("fold{i}: {m:.6}");
        }
    }
    let mos = predict_mos(&x, &models, &listeners).map_err(|e| runtime(e))?;
    println!("{mos:.6}");
    Ok(mos)
}

pub struct EvaluateArgs {
    pub manifest: PathBuf,
    pub pred: PathBuf,
    pub out: Option<PathBuf>,
}

/// `evaluate`: joins predictions with manifest truth and reports the metric
/// table. Returns the text report.
pub fn evaluate(args: EvaluateArgs) -> CmdResult<String> {
    let records = load_manifest(&args.manifest).map_err(|e| usage(e.to_string()))?;
    let truth = utterance_truth(&records);
    let preds = load_predictions(&args.pred).map_err(|e| usage(e.to_string()))?;

    let mut seen = BTreeSet::new();
    for (id, _) in &preds {
        if !seen.insert(id.clone()) {
            return Err(usage(format!("duplicate prediction for {id:?}")));
        }
    }
    let pred_ids: BTreeSet<&str> = preds.iter().map(|(id, _)| id.as_str()).collect();
    let truth_ids: BTreeSet<&str> = truth.keys().map(|s| s.as_str()).collect();
    let mut unmatched: Vec<String> = pred_ids
        .difference(&truth_ids)
        .map(|s| format!("prediction without manifest entry: {s}"))
        .collect();
    unmatched.extend(
        truth_ids
            .difference(&pred_ids)
            .map(|s| format!("manifest utterance without prediction: {s}")),
    );
    if !unmatched.is_empty() {
        let shown = unmatched.iter().take(20).cloned().collect::<Vec<_>>().join("\n");
        let more = unmatched.len().saturating_sub(20);
        let suffix = if more > 0 { format!("\n... and {more} more") } else { String::new() };
        return Err(runtime(format!("unmatched utterance ids:\n{shown}{suffix}")));
    }

    let pairs: Vec<ScorePair> = preds
        .iter()
        .map(|(id, p)| {
            let (system, t) = &truth[id];
            ScorePair {
                truth: *t,
                pred: *p,
                utterance_id: id.clone(),
                system_id: system.clone(),
            }
        })
        .collect();
    let report = evaluate_all(&pairs);
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &args.out {
        ensure_out_dir(out)?;
        std::fs::write(out.join("report.txt"), &text).map_err(|e| runtime(e))?;
        std::fs::write(out.join("report.csv"), report.to_csv()).map_err(|e| runtime(e))?;
    }
    Ok(text)
}

/// Shared by tests and `predict`: batch prediction over manifest utterances.
pub fn predict_manifest(
    models: &[FoldModel],
    listeners: &[usize],
    manifest_path: &Path,
    records: &[RatingRecord],
) -> CmdResult<Vec<(String, f64)>> {
    let mut done = BTreeSet::new();
    let mut out = Vec::new();
    for r in records {
        if done.insert(r.wav_path.as_str()) {
            let x: Waveform =
                read_wav(resolve_wav_path(manifest_path, &r.wav_path)).map_err(|e| usage(e.to_string()))?;
            let mos = predict_mos(&x, models, listeners).map_err(|e| runtime(e))?;
            out.push((r.wav_path.clone(), mos));
        }
    }
    Ok(out)
}
