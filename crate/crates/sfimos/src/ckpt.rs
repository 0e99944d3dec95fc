//! Checkpoint files: the core binary format plus model assembly from a
//! run config.

use std::path::Path;

use sfimos_core::checkpoint::{self, CheckpointError};
use sfimos_core::models::{FoldModel, Frontend, MosHead, SfEmbedding, StudentEncoder, TeacherEncoder};
use sfimos_core::nn::Tensor;
use sfimos_core::rng::sub_rng;
use thiserror::Error;

use crate::config::{FrontendKind, RunConfig};
use crate::stream;

#[derive(Debug, Error)]
pub enum CkptError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        source: CheckpointError,
    },
}

pub fn save_entries(path: impl AsRef<Path>, entries: &[(String, Tensor)]) -> Result<(), CkptError> {
    let refs: Vec<(String, &Tensor)> = entries.iter().map(|(n, t)| (n.clone(), t)).collect();
    std::fs::write(path.as_ref(), checkpoint::encode(&refs)).map_err(|source| CkptError::Write {
        path: path.as_ref().display().to_string(),
        source,
    })
}

pub fn load_entries(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>, CkptError> {
    let bytes = std::fs::read(path.as_ref()).map_err(|source| CkptError::Read {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    checkpoint::decode(&bytes).map_err(|source| CkptError::Format {
        path: path.as_ref().display().to_string(),
        source,
    })
}

/// Builds the config-shaped teacher and loads it from a checkpoint.
pub fn load_teacher(path: impl AsRef<Path>, cfg: &RunConfig) -> Result<TeacherEncoder, CkptError> {
    let entries = load_entries(path.as_ref())?;
    let mut teacher = TeacherEncoder::new(&cfg.encoder_config(), &mut sub_rng(cfg.seed, stream::TEACHER));
    teacher
        .load_named(&entries)
        .map_err(|source| CkptError::Format {
            path: path.as_ref().display().to_string(),
            source,
        })?;
    Ok(teacher)
}

/// Builds the config-shaped student and loads it from a checkpoint.
pub fn load_student(path: impl AsRef<Path>, cfg: &RunConfig) -> Result<StudentEncoder, CkptError> {
    let entries = load_entries(path.as_ref())?;
    let mut student = StudentEncoder::new(
        &cfg.encoder_config(),
        &cfg.naf_config(),
        &mut sub_rng(cfg.seed, stream::STUDENT),
    );
    student
        .load_named(&entries)
        .map_err(|source| CkptError::Format {
            path: path.as_ref().display().to_string(),
            source,
        })?;
    Ok(student)
}

/// Fresh config-shaped fold model (frontend plus head), before loading.
pub fn fold_model_skeleton(cfg: &RunConfig) -> FoldModel {
    let frontend = match cfg.frontend {
        FrontendKind::Sfi => Frontend::Sfi(StudentEncoder::new(
            &cfg.encoder_config(),
            &cfg.naf_config(),
            &mut sub_rng(cfg.seed, stream::STUDENT),
        )),
        FrontendKind::Baseline => Frontend::Baseline {
            encoder: TeacherEncoder::new(
                &cfg.encoder_config(),
                &mut sub_rng(cfg.seed, stream::BASELINE),
            ),
            sf_emb: SfEmbedding::new(cfg.dim, &mut sub_rng(cfg.seed, stream::BASELINE)),
        },
    };
    FoldModel {
        frontend,
        head: MosHead::new(cfg.num_listeners, cfg.dim, &mut sub_rng(cfg.seed, stream::HEAD)),
    }
}

pub fn load_fold_model(path: impl AsRef<Path>, cfg: &RunConfig) -> Result<FoldModel, CkptError> {
    let entries = load_entries(path.as_ref())?;
    let mut model = fold_model_skeleton(cfg);
    model
        .load_named(&entries)
        .map_err(|source| CkptError::Format {
            path: path.as_ref().display().to_string(),
            source,
        })?;
    Ok(model)
}
