//! Training: knowledge-distillation initialization of the SFI student,
//! MOS fine-tuning on normalized scores, system-disjoint cross-validation,
//! and best-checkpoint selection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::data::RatingRecord;
use crate::math;
use crate::models::{
    normalize_score, Frontend, FeatureStack, ModelError, MosHead, StudentEncoder, TeacherEncoder,
    SUPPORTED_RATES,
};
use crate::nn::{adam_step, Tensor};
use crate::rng::{sub_rng, SeedRng};
use crate::signal::{resample, Waveform};
use crate::training::stream::{CV, KD};

/// Distinct RNG streams per training stage, so stages never share draws.
pub mod stream {
    pub const KD: u64 = 1;
    pub const CV: u64 = 2;
    pub const MOS: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("waveform {index} is empty")]
    EmptyWaveform { index: usize },
    #[error("waveform {index} rate {rate_hz} Hz below the 8 kHz minimum")]
    RateTooLow { index: usize, rate_hz: u32 },
    #[error("feature stacks have {a} vs {b} layers")]
    LayerCountMismatch { a: usize, b: usize },
    #[error("feature stacks disagree in channels at layer {layer}: {a} vs {b}")]
    ChannelMismatch { layer: usize, a: usize, b: usize },
    #[error("score {0} outside [1, 5]")]
    ScoreOutOfRange(f64),
    #[error("listener {id} unknown (head has {num} listeners)")]
    UnknownListener { id: usize, num: usize },
    #[error("no audio loaded for {0:?}")]
    MissingAudio(String),
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("{systems} distinct systems cannot fill {folds} folds")]
    TooFewSystems { systems: usize, folds: usize },
    #[error("history is empty")]
    EmptyHistory,
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}

/// Hyperparameters shared by the training stages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_kd: usize,
    pub batch_pretrain: usize,
    pub batch_final: usize,
    pub kd_epochs: usize,
    pub mos_epochs: usize,
    pub folds: usize,
    /// Length of the random training crops fed to teacher and student.
    pub crop_seconds: f64,
    /// Train only the head during MOS fine-tuning.
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_kd: 32,
            batch_pretrain: 64,
            batch_final: 24,
            kd_epochs: 10,
            mos_epochs: 50,
            folds: 7,
            crop_seconds: 1.0,
            freeze_encoder: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::InvalidConfig("lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::InvalidConfig("betas must lie in [0, 1)"));
        }
        if self.batch_kd == 0 || self.batch_pretrain == 0 || self.batch_final == 0 {
            return Err(TrainError::InvalidConfig("batch sizes must be positive"));
        }
        if self.kd_epochs == 0 || self.mos_epochs == 0 {
            return Err(TrainError::InvalidConfig("epoch counts must be positive"));
        }
        if self.folds < 2 {
            return Err(TrainError::InvalidFoldCount(self.folds));
        }
        if !(self.crop_seconds > 0.0) {
            return Err(TrainError::InvalidConfig("crop_seconds must be positive"));
        }
        Ok(())
    }
}

/// Crop-time grid: one unit is 1/8000 s, which lands on an integer sample
/// index at every supported rate.
const UNIT_HZ: u64 = 8_000;

/// Rates the student may be asked to run at for a source at `f_s`:
/// the supported set restricted to `f_u <= f_s`.
pub fn admissible_rates(f_s: u32) -> Vec<u32> {
    SUPPORTED_RATES.iter().copied().filter(|&r| r <= f_s).collect()
}

/// One distillation item: which crop of which source, and the student rate.
#[derive(Debug, Clone, PartialEq)]
pub struct KdBatchPlan {
    pub item: usize,
    /// Crop start on the 1/8000 s grid.
    pub crop_start_units: u64,
    /// Crop length on the same grid.
    pub crop_len_units: u64,
    /// Student input rate, drawn uniformly from the admissible set.
    pub student_rate_hz: u32,
}

impl KdBatchPlan {
    pub fn sample(
        item: usize,
        source: &Waveform,
        crop_seconds: f64,
        rng: &mut SeedRng,
    ) -> KdBatchPlan {
        let len_units =
            (source.len() as u64 * UNIT_HZ) / source.sample_rate_hz as u64;
        let crop_len_units =
            (math::round(crop_seconds * UNIT_HZ as f64) as u64).clamp(1, len_units.max(1));
        let slack = len_units.saturating_sub(crop_len_units);
        let crop_start_units = if slack == 0 { 0 } else { rng.gen_range(0..=slack) };
        let rates = admissible_rates(source.sample_rate_hz);
        let student_rate_hz = rates[rng.gen_range(0..rates.len())];
        KdBatchPlan {
            item,
            crop_start_units,
            crop_len_units,
            student_rate_hz,
        }
    }
}

/// Distillation loss: sum over layers of the squared L2 distance between
/// teacher and student feature maps, truncated to the common frame count.
pub fn kd_loss(h: &FeatureStack, h_sfi: &FeatureStack) -> Result<f64, TrainError> {
    check_stacks(h, h_sfi)?;
    let mut total = 0.0;
    for (t, s) in h.layers.iter().zip(h_sfi.layers.iter()) {
        let (c, tf, sf) = (t.shape()[0], t.shape()[1], s.shape()[1]);
        let frames = tf.min(sf);
        for ch in 0..c {
            let trow = &t.data()[ch * tf..ch * tf + frames];
            let srow = &s.data()[ch * sf..ch * sf + frames];
            for (a, b) in trow.iter().zip(srow.iter()) {
                let d = a - b;
                total += d * d;
            }
        }
    }
    Ok(total)
}

fn check_stacks(h: &FeatureStack, h_sfi: &FeatureStack) -> Result<(), TrainError> {
    if h.num_layers() != h_sfi.num_layers() {
        return Err(TrainError::LayerCountMismatch {
            a: h.num_layers(),
            b: h_sfi.num_layers(),
        });
    }
    for (layer, (t, s)) in h.layers.iter().zip(h_sfi.layers.iter()).enumerate() {
        if t.shape()[0] != s.shape()[0] {
            return Err(TrainError::ChannelMismatch {
                layer,
                a: t.shape()[0],
                b: s.shape()[0],
            });
        }
    }
    Ok(())
}

/// Gradient of `scale * kd_loss` w.r.t. the student stack, padded with zeros
/// over the student's frames beyond the truncation point.
fn kd_loss_grads(
    h: &FeatureStack,
    h_sfi: &FeatureStack,
    scale: f64,
) -> Vec<Option<Tensor>> {
    let mut grads = Vec::with_capacity(h.num_layers());
    for (t, s) in h.layers.iter().zip(h_sfi.layers.iter()) {
        let (c, tf, sf) = (t.shape()[0], t.shape()[1], s.shape()[1]);
        let frames = tf.min(sf);
        let mut g = alloc::vec![0.0; c * sf];
        for ch in 0..c {
            let trow = &t.data()[ch * tf..ch * tf + frames];
            let srow = &s.data()[ch * sf..ch * sf + frames];
            let grow = &mut g[ch * sf..ch * sf + frames];
            for i in 0..frames {
                grow[i] = 2.0 * scale * (srow[i] - trow[i]);
            }
        }
        grads.push(Some(Tensor::from_vec(&[c, sf], g)));
    }
    grads
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdEpoch {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdReport {
    pub history: Vec<KdEpoch>,
    pub steps: u64,
}

struct CachedItem {
    by_rate: BTreeMap<u32, Waveform>,
    len_units: u64,
}

fn crop_at(w: &Waveform, start_units: u64, len_units: u64) -> Waveform {
    let per_unit = w.sample_rate_hz as u64 / UNIT_HZ;
    debug_assert!(w.sample_rate_hz as u64 % UNIT_HZ == 0);
    let start = (start_units * per_unit) as usize;
    let len = (len_units * per_unit) as usize;
    let end = (start + len).min(w.len());
    Waveform::new(w.samples[start.min(w.len())..end].to_vec(), w.sample_rate_hz)
}

/// Distills the frozen teacher's per-layer features into the SFI student.
///
/// Per item the plan draws a crop and a student rate; the teacher always sees
/// the 16 kHz resample of the same crop. One Adam step per batch, on the
/// student only.
pub fn kd_train(
    dataset: &[Waveform],
    teacher: &TeacherEncoder,
    student: &mut StudentEncoder,
    config: &TrainConfig,
) -> Result<KdReport, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for (index, w) in dataset.iter().enumerate() {
        if w.is_empty() {
            return Err(TrainError::EmptyWaveform { index });
        }
        if w.sample_rate_hz < 8_000 {
            return Err(TrainError::RateTooLow {
                index,
                rate_hz: w.sample_rate_hz,
            });
        }
    }

    // one resample per (item, rate) up front; crops then slice on the shared
    // 1/8000 s grid
    let mut cache = Vec::with_capacity(dataset.len());
    for w in dataset {
        let mut by_rate = BTreeMap::new();
        by_rate.insert(16_000, resample(w, 16_000)?);
        for rate in admissible_rates(w.sample_rate_hz) {
            by_rate.entry(rate).or_insert(resample(w, rate)?);
        }
        let len_units = (w.len() as u64 * UNIT_HZ) / w.sample_rate_hz as u64;
        cache.push(CachedItem { by_rate, len_units });
    }

    let mut rng = sub_rng(config.seed, KD);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.kd_epochs);
    let mut total_steps = 0u64;

    for epoch in 1..=config.kd_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        for chunk in order.chunks(config.batch_kd) {
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &item in chunk {
                let plan = KdBatchPlan::sample(item, &dataset[item], config.crop_seconds, &mut rng);
                let entry = &cache[item];
                let crop_len = plan.crop_len_units.min(entry.len_units);
                let teacher_in = crop_at(&entry.by_rate[&16_000], plan.crop_start_units, crop_len);
                let student_in = crop_at(
                    &entry.by_rate[&plan.student_rate_hz],
                    plan.crop_start_units,
                    crop_len,
                );
                let (t_stack, _) =
                    teacher.forward_tensor(&tensor_of(&teacher_in), false)?;
                let (s_stack, s_cache) = student.forward_tensor(
                    &tensor_of(&student_in),
                    plan.student_rate_hz,
                    true,
                )?;
                let loss = kd_loss(&t_stack, &s_stack)?;
                let grads = kd_loss_grads(&t_stack, &s_stack, scale);
                student.backward(&s_cache.expect("cache requested"), &grads)?;
                batch_loss += loss * scale;
            }
            adam_step(
                student.params_mut(),
                config.lr,
                config.beta1,
                config.beta2,
                config.eps,
            );
            epoch_loss += batch_loss;
            epoch_steps += 1;
            total_steps += 1;
        }
        history.push(KdEpoch {
            epoch,
            mean_loss: epoch_loss / epoch_steps as f64,
        });
    }
    Ok(KdReport {
        history,
        steps: total_steps,
    })
}

fn tensor_of(w: &Waveform) -> Tensor {
    Tensor::from_vec(&[1, w.len()], w.samples.clone())
}

/// Waveforms keyed by manifest path.
pub type AudioStore = BTreeMap<String, Waveform>;

#[derive(Debug, Clone, PartialEq)]
pub struct MosEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosTrainReport {
    pub history: Vec<MosEpoch>,
    pub best_epoch: usize,
}

fn check_records(
    records: &[RatingRecord],
    audio: &AudioStore,
    head: &MosHead,
) -> Result<(), TrainError> {
    for r in records {
        if !(1.0..=5.0).contains(&r.score) || !r.score.is_finite() {
            return Err(TrainError::ScoreOutOfRange(r.score));
        }
        if r.listener_id >= head.num_listeners() {
            return Err(TrainError::UnknownListener {
                id: r.listener_id,
                num: head.num_listeners(),
            });
        }
        if !audio.contains_key(&r.wav_path) {
            return Err(TrainError::MissingAudio(r.wav_path.clone()));
        }
    }
    Ok(())
}

/// MOS fine-tuning: minimizes the squared error between the
/// listener-conditioned prediction and the (optionally normalized) rating.
///
/// With `freeze_encoder` the frontend is left untouched and its pooled
/// features are computed once per utterance. The model is rewound to the
/// epoch with the lowest validation loss before returning.
#[allow(clippy::too_many_arguments)]
pub fn mos_train(
    train: &[RatingRecord],
    val: &[RatingRecord],
    audio: &AudioStore,
    frontend: &mut Frontend,
    head: &mut MosHead,
    config: &TrainConfig,
    batch_size: usize,
    normalize: bool,
    seed: u64,
) -> Result<MosTrainReport, TrainError> {
    config.validate()?;
    if batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch size must be positive"));
    }
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_records(train, audio, head)?;
    check_records(val, audio, head)?;

    let target = |score: f64| if normalize { normalize_score(score) } else { score };

    // frozen frontend: one pooled vector per distinct utterance
    let mut pooled_cache: BTreeMap<&str, Tensor> = BTreeMap::new();
    if config.freeze_encoder {
        for r in train.iter().chain(val.iter()) {
            if !pooled_cache.contains_key(r.wav_path.as_str()) {
                let feats = frontend.pooled(&audio[&r.wav_path])?;
                pooled_cache.insert(r.wav_path.as_str(), feats);
            }
        }
    }

    let mut rng = sub_rng(seed, stream::MOS);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.mos_epochs);
    let mut best: Option<(f64, Frontend, MosHead)> = None;

    for epoch in 1..=config.mos_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            for &idx in chunk {
                let r = &train[idx];
                let t = target(r.score);
                if config.freeze_encoder {
                    let pooled = &pooled_cache[r.wav_path.as_str()];
                    let (s, cache) = head.score_vector(pooled, r.listener_id)?;
                    let d = s - t;
                    train_loss += d * d;
                    head.backward(&cache, 2.0 * d * scale)?;
                } else {
                    let (pooled, f_cache) = frontend.forward_train(&audio[&r.wav_path])?;
                    let (s, cache) = head.score_vector(&pooled, r.listener_id)?;
                    let d = s - t;
                    train_loss += d * d;
                    let grad_pooled = head.backward(&cache, 2.0 * d * scale)?;
                    frontend.backward(&f_cache, &grad_pooled)?;
                }
            }
            if config.freeze_encoder {
                adam_step(head.params_mut(), config.lr, config.beta1, config.beta2, config.eps);
            } else {
                let mut params = frontend.params_mut();
                params.extend(head.params_mut());
                adam_step(params, config.lr, config.beta1, config.beta2, config.eps);
            }
        }
        train_loss /= train.len() as f64;

        let mut val_loss = 0.0;
        for r in val {
            let pooled = if config.freeze_encoder {
                pooled_cache[r.wav_path.as_str()].clone()
            } else {
                frontend.pooled(&audio[&r.wav_path])?
            };
            let (s, _) = head.score_vector(&pooled, r.listener_id)?;
            let d = s - target(r.score);
            val_loss += d * d;
        }
        val_loss = if val.is_empty() {
            train_loss
        } else {
            val_loss / val.len() as f64
        };

        history.push(MosEpoch {
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().map_or(true, |(b, _, _)| val_loss < *b) {
            best = Some((val_loss, frontend.clone(), head.clone()));
        }
    }

    let (_, best_frontend, best_head) = best.expect("at least one epoch ran");
    *frontend = best_frontend;
    *head = best_head;
    let pairs: Vec<(usize, f64)> = history.iter().map(|e| (e.epoch, e.val_loss)).collect();
    let best_epoch = select_checkpoint(&pairs)?;
    Ok(MosTrainReport {
        history,
        best_epoch,
    })
}

/// System-disjoint cross-validation: systems are shuffled and dealt
/// round-robin into `k` folds (sizes differ by at most one system); each
/// fold's validation half holds every record of its systems.
pub fn cv_split(
    records: &[RatingRecord],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<RatingRecord>, Vec<RatingRecord>)>, TrainError> {
    if k < 2 {
        return Err(TrainError::InvalidFoldCount(k));
    }
    let mut systems: Vec<&str> = records
        .iter()
        .map(|r| r.system_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if systems.len() < k {
        return Err(TrainError::TooFewSystems {
            systems: systems.len(),
            folds: k,
        });
    }
    let mut rng = sub_rng(seed, CV);
    systems.shuffle(&mut rng);

    let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, sys) in systems.iter().enumerate() {
        fold_of.insert(sys, i % k);
    }
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for r in records {
            if fold_of[r.system_id.as_str()] == f {
                val.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
        folds.push((train, val));
    }
    Ok(folds)
}

/// Epoch with the minimum validation loss; earliest wins ties.
pub fn select_checkpoint(history: &[(usize, f64)]) -> Result<usize, TrainError> {
    let mut best: Option<(usize, f64)> = None;
    for &(epoch, loss) in history {
        match best {
            None => best = Some((epoch, loss)),
            Some((_, b)) if loss < b => best = Some((epoch, loss)),
            _ => {}
        }
    }
    best.map(|(e, _)| e).ok_or(TrainError::EmptyHistory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    #[test]
    fn kd_loss_zero_on_identical_stacks() {
        let t = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let stack = FeatureStack {
            layers: vec![t.clone(), t.clone()],
        };
        assert_eq!(kd_loss(&stack, &stack).unwrap(), 0.0);
    }

    #[test]
    fn kd_loss_single_mismatch() {
        let a = FeatureStack {
            layers: vec![Tensor::from_vec(&[1, 2], vec![1.0, 0.0])],
        };
        let b = FeatureStack {
            layers: vec![Tensor::from_vec(&[1, 2], vec![0.0, 0.0])],
        };
        assert_eq!(kd_loss(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn kd_loss_truncates_to_common_frames() {
        let a = FeatureStack {
            layers: vec![Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 9.0])],
        };
        let b = FeatureStack {
            layers: vec![Tensor::from_vec(&[1, 2], vec![1.0, 2.0])],
        };
        assert_eq!(kd_loss(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn kd_loss_rejects_layer_count_mismatch() {
        let t = Tensor::zeros(&[1, 2]);
        let a = FeatureStack {
            layers: vec![t.clone(), t.clone()],
        };
        let b = FeatureStack { layers: vec![t] };
        assert!(matches!(
            kd_loss(&a, &b),
            Err(TrainError::LayerCountMismatch { a: 2, b: 1 })
        ));
    }

    #[test]
    fn admissible_rates_never_exceed_source() {
        use crate::rng::seed_rng;
        let mut rng = seed_rng(5);
        for &f_s in &SUPPORTED_RATES {
            let w = Waveform::new(vec![0.1; f_s as usize], f_s);
            for _ in 0..10_000 {
                let plan = KdBatchPlan::sample(0, &w, 0.5, &mut rng);
                assert!(plan.student_rate_hz <= f_s);
                assert!(SUPPORTED_RATES.contains(&plan.student_rate_hz));
            }
        }
    }

    fn dummy_records(systems: usize, per_system: usize) -> Vec<RatingRecord> {
        let mut out = Vec::new();
        for s in 0..systems {
            for u in 0..per_system {
                out.push(RatingRecord {
                    wav_path: format!("wav/s{s:02}_{u:03}.wav"),
                    system_id: format!("s{s:02}"),
                    listener_id: u % 10,
                    score: 3.0,
                    sample_rate_hz: 16_000,
                });
            }
        }
        out
    }

    #[test]
    fn cv_split_validates_each_system_exactly_once() {
        let records = dummy_records(7, 4);
        let folds = cv_split(&records, 7, 3).unwrap();
        assert_eq!(folds.len(), 7);
        let mut seen = BTreeSet::new();
        for (train, val) in &folds {
            assert_eq!(train.len() + val.len(), records.len());
            let val_systems: BTreeSet<_> = val.iter().map(|r| r.system_id.clone()).collect();
            assert_eq!(val_systems.len(), 1);
            let train_systems: BTreeSet<_> = train.iter().map(|r| r.system_id.clone()).collect();
            assert!(val_systems.is_disjoint(&train_systems));
            seen.extend(val_systems);
        }
        assert_eq!(seen.len(), 7);
    }

    #[test]
    fn cv_split_balances_uneven_systems() {
        let records = dummy_records(8, 2);
        let folds = cv_split(&records, 7, 1).unwrap();
        let sizes: Vec<usize> = folds
            .iter()
            .map(|(_, val)| {
                val.iter()
                    .map(|r| r.system_id.clone())
                    .collect::<BTreeSet<_>>()
                    .len()
            })
            .collect();
        assert_eq!(sizes.iter().sum::<usize>(), 8);
        assert!(sizes.iter().all(|&s| s == 1 || s == 2));
    }

    #[test]
    fn cv_split_rejects_too_few_systems() {
        let records = dummy_records(3, 2);
        assert!(matches!(
            cv_split(&records, 7, 0),
            Err(TrainError::TooFewSystems { systems: 3, folds: 7 })
        ));
    }

    #[test]
    fn cv_split_is_deterministic() {
        let records = dummy_records(9, 3);
        assert_eq!(
            cv_split(&records, 4, 11).unwrap(),
            cv_split(&records, 4, 11).unwrap()
        );
    }

    #[test]
    fn select_checkpoint_picks_minimum_and_breaks_ties_early() {
        assert_eq!(
            select_checkpoint(&[(1, 0.5), (2, 0.3), (3, 0.4)]).unwrap(),
            2
        );
        assert_eq!(
            select_checkpoint(&[(1, 0.5), (2, 0.3), (5, 0.3)]).unwrap(),
            2
        );
        assert_eq!(select_checkpoint(&[(4, 1.0)]).unwrap(), 4);
        assert!(matches!(
            select_checkpoint(&[]),
            Err(TrainError::EmptyHistory)
        ));
    }

    #[test]
    fn normalized_targets_match_the_formula() {
        assert_eq!(normalize_score(2.0), 0.0);
        assert_eq!(normalize_score(5.0), 1.0);
        assert_eq!(normalize_score(1.0), -1.0 / 3.0);
    }
}
