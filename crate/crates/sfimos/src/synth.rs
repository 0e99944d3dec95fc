//! Writes the synthetic track-shaped dataset to disk: WAV files, the rating
//! manifest, and the hidden-quality sidecar.

use std::fmt::Write as _;
use std::path::Path;

use sfimos_core::data::generate_synth_dataset;
use thiserror::Error;

use crate::wav::{write_wav, WavEncoding, WavError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot create {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Wav(#[from] WavError),
}

fn io_err(path: &Path, source: std::io::Error) -> SynthError {
    SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Generates the dataset into `out_dir`: `wav/*.wav` (16-bit PCM),
/// `manifest.csv`, and `systems.csv`.
pub fn synth_dataset(out_dir: impl AsRef<Path>, seed: u64) -> Result<(), SynthError> {
    let out = out_dir.as_ref();
    let wav_dir = out.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| io_err(&wav_dir, e))?;

    let ds = generate_synth_dataset(seed);
    for utt in &ds.utterances {
        write_wav(out.join(&utt.file_name), &utt.audio, WavEncoding::Pcm16)?;
    }

    let mut manifest = String::from("wav_path,system_id,listener_id,score,sample_rate_hz\n");
    for r in &ds.ratings {
        let _ = writeln!(
            manifest,
            "{},{},{},{},{}",
            r.wav_path, r.system_id, r.listener_id, r.score, r.sample_rate_hz
        );
    }
    let manifest_path = out.join("manifest.csv");
    std::fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;

    let mut sidecar = String::from("system_id,true_quality\n");
    for s in &ds.systems {
        let _ = writeln!(sidecar, "{},{}", s.id, s.quality);
    }
    let sidecar_path = out.join("systems.csv");
    std::fs::write(&sidecar_path, sidecar).map_err(|e| io_err(&sidecar_path, e))?;
    Ok(())
}
