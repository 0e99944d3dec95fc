//! Rating-manifest CSV ingestion, prediction CSVs, and the hidden-quality
//! sidecar.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sfimos_core::data::RatingRecord;
use sfimos_core::training::AudioStore;
use thiserror::Error;

use crate::wav::{read_wav, WavError};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} row {row}: {message}")]
    Invalid {
        path: String,
        row: usize,
        message: String,
    },
    #[error("{path} row {row}: duplicate rating for ({wav}, listener {listener})")]
    Duplicate {
        path: String,
        row: usize,
        wav: String,
        listener: usize,
    },
    #[error(transparent)]
    Wav(#[from] WavError),
}

#[derive(Debug, Deserialize)]
struct Row {
    wav_path: String,
    system_id: String,
    listener_id: usize,
    score: f64,
    sample_rate_hz: u32,
}

/// Loads and validates a rating manifest. Rows must carry the header
/// `wav_path,system_id,listener_id,score,sample_rate_hz`; duplicate
/// (wav_path, listener_id) pairs are rejected.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<RatingRecord>, ManifestError> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|source| csv_open_error(&path_str, source))?;

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row_no = i + 2; // header is row 1
        let row = row.map_err(|source| ManifestError::Csv {
            path: path_str.clone(),
            source,
        })?;
        let record = RatingRecord {
            wav_path: row.wav_path,
            system_id: row.system_id,
            listener_id: row.listener_id,
            score: row.score,
            sample_rate_hz: row.sample_rate_hz,
        };
        record.validate().map_err(|e| ManifestError::Invalid {
            path: path_str.clone(),
            row: row_no,
            message: e.to_string(),
        })?;
        if !seen.insert((record.wav_path.clone(), record.listener_id)) {
            return Err(ManifestError::Duplicate {
                path: path_str.clone(),
                row: row_no,
                wav: record.wav_path,
                listener: record.listener_id,
            });
        }
        out.push(record);
    }
    Ok(out)
}

fn csv_open_error(path: &str, source: csv::Error) -> ManifestError {
    if let csv::ErrorKind::Io(io) = source.into_kind() {
        ManifestError::Open {
            path: path.to_string(),
            source: io,
        }
    } else {
        ManifestError::Open {
            path: path.to_string(),
            source: std::io::Error::other("malformed CSV"),
        }
    }
}

/// Resolves a manifest-relative wav path against the manifest's directory.
pub fn resolve_wav_path(manifest_path: &Path, wav_path: &str) -> PathBuf {
    let p = Path::new(wav_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Loads every distinct waveform a record set refers to.
pub fn load_audio(
    manifest_path: &Path,
    records: &[RatingRecord],
) -> Result<AudioStore, ManifestError> {
    let mut store = AudioStore::new();
    for r in records {
        if !store.contains_key(&r.wav_path) {
            let w = read_wav(resolve_wav_path(manifest_path, &r.wav_path))?;
            store.insert(r.wav_path.clone(), w);
        }
    }
    Ok(store)
}

/// Mean rating per utterance, with its system id: the evaluation truth.
pub fn utterance_truth(records: &[RatingRecord]) -> BTreeMap<String, (String, f64)> {
    let mut acc: BTreeMap<String, (String, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc
            .entry(r.wav_path.clone())
            .or_insert_with(|| (r.system_id.clone(), 0.0, 0));
        e.1 += r.score;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(path, (sys, sum, n))| (path, (sys, sum / n as f64)))
        .collect()
}

/// Predictions CSV: header `utterance_id,pred`.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>, ManifestError> {
    let path_str = path.as_ref().display().to_string();
    #[derive(Deserialize)]
    struct PredRow {
        utterance_id: String,
        pred: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|source| csv_open_error(&path_str, source))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<PredRow>() {
        let row = row.map_err(|source| ManifestError::Csv {
            path: path_str.clone(),
            source,
        })?;
        out.push((row.utterance_id, row.pred));
    }
    Ok(out)
}

pub fn save_predictions(
    path: impl AsRef<Path>,
    predictions: &[(String, f64)],
) -> std::io::Result<()> {
    let mut text = String::from("utterance_id,pred\n");
    for (id, p) in predictions {
        text.push_str(&format!("{id},{p}\n"));
    }
    std::fs::write(path, text)
}

/// Hidden-quality sidecar: `system_id,true_quality`.
pub fn load_sidecar(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>, ManifestError> {
    let path_str = path.as_ref().display().to_string();
    #[derive(Deserialize)]
    struct SideRow {
        system_id: String,
        true_quality: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|source| csv_open_error(&path_str, source))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<SideRow>() {
        let row = row.map_err(|source| ManifestError::Csv {
            path: path_str.clone(),
            source,
        })?;
        out.insert(row.system_id, row.true_quality);
    }
    Ok(out)
}
