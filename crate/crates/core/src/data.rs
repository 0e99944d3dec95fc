//! Rating records and the synthetic desk-scale dataset.
//!
//! The generator mirrors the track's class-imbalanced composition: 30
//! utterances from each of 4 systems at 16 kHz, 30 from each of 8 systems at
//! 24 kHz, and 5 from each of 8 systems at 48 kHz, every utterance rated by
//! 10 listeners. Each "system" is a deterministic signal-degradation family
//! with a hidden quality, so system ranking has a known ground truth.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::math;
use crate::models::TRACK_RATES;
use crate::rng::{normal, seed_rng, SeedRng};
use crate::signal::Waveform;

/// One listener rating of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub wav_path: String,
    pub system_id: String,
    pub listener_id: usize,
    pub score: f64,
    pub sample_rate_hz: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("score {0} outside [1, 5]")]
    ScoreOutOfRange(f64),
    #[error("sample rate {0} Hz not in the track set {{16000, 24000, 48000}}")]
    UnknownRate(u32),
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(1.0..=5.0).contains(&self.score) || !self.score.is_finite() {
            return Err(DataError::ScoreOutOfRange(self.score));
        }
        if !TRACK_RATES.contains(&self.sample_rate_hz) {
            return Err(DataError::UnknownRate(self.sample_rate_hz));
        }
        Ok(())
    }
}

/// Track composition: (system count, utterances per system, rate).
pub const TRACK_COMPOSITION: [(usize, usize, u32); 3] =
    [(4, 30, 16_000), (8, 30, 24_000), (8, 5, 48_000)];

pub const NUM_LISTENERS: usize = 10;

/// One degradation family with its hidden quality.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSystem {
    pub id: String,
    pub rate_hz: u32,
    pub quality: f64,
    noise_amp: f64,
    cutoff_hz: f64,
    drive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub file_name: String,
    pub system_id: String,
    pub audio: Waveform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub systems: Vec<SynthSystem>,
    pub utterances: Vec<SynthUtterance>,
    pub ratings: Vec<RatingRecord>,
}

fn system_from_quality(idx: usize, rate_hz: u32, quality: f64) -> SynthSystem {
    let t = (quality - 1.0) / 4.0;
    SynthSystem {
        id: format!("s{idx:02}"),
        rate_hz,
        quality,
        noise_amp: 0.30 * math::powf(10.0, -2.0 * t),
        cutoff_hz: 900.0 + 5100.0 * t,
        drive: 0.5 * (1.0 - t) * (1.0 - t),
    }
}

/// Harmonic "speech-like" tone complex degraded by the system's band limit,
/// waveshaping drive, and additive noise.
fn synth_utterance(sys: &SynthSystem, duration_s: f64, rng: &mut SeedRng) -> Waveform {
    let rate = sys.rate_hz as f64;
    let n = (duration_s * rate) as usize;
    let f0 = rng.gen_range(100.0..240.0);
    let content_band = (0.45 * rate).min(6_800.0);
    let harmonics = ((content_band / f0) as usize).clamp(1, 24);

    // per-harmonic amplitude: 1/h rolloff shaped by the system's lowpass
    let mut amps = Vec::with_capacity(harmonics);
    let mut amp_sum = 0.0;
    for h in 1..=harmonics {
        let f = h as f64 * f0;
        let rel = f / sys.cutoff_hz;
        let gain = 1.0 / (1.0 + rel * rel * rel * rel);
        let a = gain / h as f64;
        amp_sum += a;
        amps.push(a);
    }
    let norm = 0.75 / amp_sum.max(1e-9);

    let mut samples = alloc::vec![0.0; n];
    for (h, &a) in amps.iter().enumerate() {
        let freq = (h + 1) as f64 * f0;
        let step = core::f64::consts::TAU * freq / rate;
        let (rot_im, rot_re) = (math::sin(step), math::cos(step));
        let phase = rng.gen_range(0.0..core::f64::consts::TAU);
        let mut re = math::cos(phase);
        let mut im = math::sin(phase);
        let amp = a * norm;
        for s in samples.iter_mut() {
            *s += amp * im;
            let nre = re * rot_re - im * rot_im;
            im = re * rot_im + im * rot_re;
            re = nre;
        }
    }

    // slow amplitude modulation plus fade-in/out
    let am_freq = rng.gen_range(2.0..6.0);
    let am_phase = rng.gen_range(0.0..core::f64::consts::TAU);
    let fade = (0.02 * rate) as usize;
    let drive_norm = math::tanh(3.0);
    for (i, s) in samples.iter_mut().enumerate() {
        let t = i as f64 / rate;
        let mut env = 0.7 + 0.3 * math::sin(core::f64::consts::TAU * am_freq * t + am_phase);
        if i < fade {
            env *= i as f64 / fade as f64;
        }
        let tail = n - 1 - i;
        if tail < fade {
            env *= tail as f64 / fade as f64;
        }
        let clean = *s * env;
        let distorted =
            (1.0 - sys.drive) * clean + sys.drive * math::tanh(3.0 * clean) / drive_norm;
        let noisy = distorted + sys.noise_amp * normal(rng);
        *s = noisy.clamp(-1.0, 1.0);
    }
    Waveform::new(samples, sys.rate_hz)
}

/// Generates the full synthetic dataset in memory.
pub fn generate_synth_dataset(seed: u64) -> SynthDataset {
    let mut rng = seed_rng(seed);

    let total_systems: usize = TRACK_COMPOSITION.iter().map(|&(s, _, _)| s).sum();
    // evenly spread hidden qualities with jitter, shuffled over systems so
    // quality does not correlate with sampling rate
    let mut qualities: Vec<f64> = (0..total_systems)
        .map(|i| {
            let base = 1.4 + 3.2 * i as f64 / (total_systems - 1) as f64;
            base + rng.gen_range(-0.10..0.10)
        })
        .collect();
    qualities.shuffle(&mut rng);

    let mut systems = Vec::with_capacity(total_systems);
    let mut idx = 0;
    for &(count, _, rate) in &TRACK_COMPOSITION {
        for _ in 0..count {
            systems.push(system_from_quality(idx, rate, qualities[idx]));
            idx += 1;
        }
    }

    let listener_bias: Vec<f64> = (0..NUM_LISTENERS).map(|_| 0.25 * normal(&mut rng)).collect();

    let mut utterances = Vec::new();
    let mut ratings = Vec::new();
    let mut sys_idx = 0;
    for &(count, per_system, _) in &TRACK_COMPOSITION {
        for _ in 0..count {
            let sys = systems[sys_idx].clone();
            for u in 0..per_system {
                let duration = rng.gen_range(0.6..1.2);
                let audio = synth_utterance(&sys, duration, &mut rng);
                let file_name = format!("wav/{}_{u:03}.wav", sys.id);
                for (listener, &bias) in listener_bias.iter().enumerate() {
                    let score = (sys.quality + bias + 0.3 * normal(&mut rng)).clamp(1.0, 5.0);
                    ratings.push(RatingRecord {
                        wav_path: file_name.clone(),
                        system_id: sys.id.clone(),
                        listener_id: listener,
                        score,
                        sample_rate_hz: sys.rate_hz,
                    });
                }
                utterances.push(SynthUtterance {
                    file_name,
                    system_id: sys.id.clone(),
                    audio,
                });
            }
            sys_idx += 1;
        }
    }

    SynthDataset {
        systems,
        utterances,
        ratings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{srcc, ScorePair};
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;

    #[test]
    fn composition_matches_the_track() {
        let ds = generate_synth_dataset(123);
        assert_eq!(ds.systems.len(), 20);
        assert_eq!(ds.utterances.len(), 400);
        assert_eq!(ds.ratings.len(), 4000);
        let mut by_rate: BTreeMap<u32, usize> = BTreeMap::new();
        for u in &ds.utterances {
            *by_rate.entry(u.audio.sample_rate_hz).or_default() += 1;
        }
        assert_eq!(by_rate[&16_000], 120);
        assert_eq!(by_rate[&24_000], 240);
        assert_eq!(by_rate[&48_000], 40);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synth_dataset(7);
        let b = generate_synth_dataset(7);
        assert_eq!(a, b);
    }

    #[test]
    fn ratings_validate_and_track_hidden_quality() {
        let ds = generate_synth_dataset(99);
        for r in &ds.ratings {
            r.validate().unwrap();
        }
        // per-system mean rating should rank systems like the hidden quality
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for r in &ds.ratings {
            let e = sums.entry(&r.system_id).or_insert((0.0, 0));
            e.0 += r.score;
            e.1 += 1;
        }
        let pairs: Vec<ScorePair> = ds
            .systems
            .iter()
            .map(|s| {
                let (sum, n) = sums[s.id.as_str()];
                ScorePair {
                    truth: s.quality,
                    pred: sum / n as f64,
                    utterance_id: s.id.clone(),
                    system_id: s.id.clone(),
                }
            })
            .collect();
        assert!(srcc(&pairs).unwrap() >= 0.95);
    }

    #[test]
    fn record_validation_rejects_bad_rows() {
        let mut r = RatingRecord {
            wav_path: "wav/x.wav".to_string(),
            system_id: "s00".to_string(),
            listener_id: 0,
            score: 5.5,
            sample_rate_hz: 16_000,
        };
        assert_eq!(r.validate().unwrap_err(), DataError::ScoreOutOfRange(5.5));
        r.score = 3.0;
        r.sample_rate_hz = 44_100;
        assert_eq!(r.validate().unwrap_err(), DataError::UnknownRate(44_100));
    }
}
