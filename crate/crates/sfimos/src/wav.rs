//! WAV (RIFF) file IO. Reads 16/24-bit PCM and 32-bit float, mono or first
//! channel; writes any of the three encodings.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use sfimos_core::Waveform;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: hound::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: hound::Error,
    },
    #[error("{path}: unsupported encoding ({bits}-bit {format:?})")]
    UnsupportedEncoding {
        path: String,
        bits: u16,
        format: SampleFormat,
    },
    #[error("{path}: zero-length audio")]
    ZeroLength { path: String },
}

const PCM16_SCALE: f64 = 32_768.0;
const PCM24_SCALE: f64 = 8_388_608.0;

/// Reads a WAV file, taking channel 0 of multichannel audio. Samples are
/// scaled to [-1, 1]; the rate comes from the header.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform, WavError> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = WavReader::open(path.as_ref()).map_err(|source| WavError::Read {
        path: path_str.clone(),
        source,
    })?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;

    let mut samples = Vec::with_capacity(reader.duration() as usize);
    let mut take = |iter: &mut dyn Iterator<Item = Result<f64, hound::Error>>| -> Result<(), WavError> {
        for (i, s) in iter.enumerate() {
            let v = s.map_err(|source| WavError::Read {
                path: path_str.clone(),
                source,
            })?;
            if i % channels == 0 {
                samples.push(v.clamp(-1.0, 1.0));
            }
        }
        Ok(())
    };

    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => {
            let mut iter = reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f64 / PCM16_SCALE));
            take(&mut iter)?;
        }
        (SampleFormat::Int, 24) => {
            let mut iter = reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / PCM24_SCALE));
            take(&mut iter)?;
        }
        (SampleFormat::Float, 32) => {
            let mut iter = reader.samples::<f32>().map(|s| s.map(|v| v as f64));
            take(&mut iter)?;
        }
        (format, bits) => {
            return Err(WavError::UnsupportedEncoding {
                path: path_str,
                bits,
                format,
            })
        }
    }

    if samples.is_empty() {
        return Err(WavError::ZeroLength { path: path_str });
    }
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Output encodings supported by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Float32,
}

pub fn write_wav(
    path: impl AsRef<Path>,
    w: &Waveform,
    encoding: WavEncoding,
) -> Result<(), WavError> {
    let path_str = path.as_ref().display().to_string();
    let wrap = |source: hound::Error| WavError::Write {
        path: path_str.clone(),
        source,
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Pcm24 => 24,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Float32 => SampleFormat::Float,
            _ => SampleFormat::Int,
        },
    };
    let mut writer = WavWriter::create(path.as_ref(), spec).map_err(&wrap)?;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &w.samples {
                let v = (s * PCM16_SCALE).round().clamp(-32_768.0, 32_767.0) as i16;
                writer.write_sample(v).map_err(&wrap)?;
            }
        }
        WavEncoding::Pcm24 => {
            for &s in &w.samples {
                let v = (s * PCM24_SCALE)
                    .round()
                    .clamp(-8_388_608.0, 8_388_607.0) as i32;
                writer.write_sample(v).map_err(&wrap)?;
            }
        }
        WavEncoding::Float32 => {
            for &s in &w.samples {
                writer.write_sample(s as f32).map_err(&wrap)?;
            }
        }
    }
    writer.finalize().map_err(&wrap)
}
