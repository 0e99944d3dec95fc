//! Waveform representation, band-limited resampling, and test-signal
//! generation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::math;
use crate::rng::seed_rng;

/// Audio samples with an explicit sampling frequency.
///
/// Pipeline inputs use rates from {8, 16, 24, 48} kHz; intermediate signals
/// may carry any positive rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        assert!(sample_rate_hz > 0, "sample rate must be positive");
        Waveform {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("sample rate must be positive")]
    InvalidRate,
    #[error("noise band {band_hz} Hz above Nyquist {nyquist_hz} Hz")]
    BandAboveNyquist { band_hz: f64, nyquist_hz: f64 },
    #[error("noise band must be positive")]
    InvalidBand,
}

/// Kaiser window shape parameter, ~80 dB stopband.
const KAISER_BETA: f64 = 8.6;
/// Sinc zero crossings kept on each side of the filter center.
const ZEROS_PER_SIDE: usize = 64;
/// Phases per sample in the precomputed filter table.
const TABLE_OVERSAMPLE: usize = 256;

/// Band-limited resampling by windowed-sinc interpolation.
///
/// The cutoff sits at the lower of the two Nyquist frequencies. Output length
/// is `round(len * target_hz / source_hz)`; resampling to the source rate
/// returns a bit-identical copy.
pub fn resample(w: &Waveform, target_hz: u32) -> Result<Waveform, SignalError> {
    if target_hz == 0 {
        return Err(SignalError::InvalidRate);
    }
    if target_hz == w.sample_rate_hz {
        return Ok(w.clone());
    }
    let source_hz = w.sample_rate_hz;
    let len = w.samples.len();
    // round(len * target / source) in exact integer arithmetic
    let out_len =
        ((len as u128 * target_hz as u128 * 2 + source_hz as u128) / (source_hz as u128 * 2)) as usize;
    if out_len == 0 || len == 0 {
        return Ok(Waveform::new(Vec::new(), target_hz));
    }

    // cutoff as a fraction of the source Nyquist
    let fc = (target_hz as f64 / source_hz as f64).min(1.0);
    let half_width = ZEROS_PER_SIDE as f64 / fc;
    let table = build_sinc_table(fc, half_width);

    let ratio = source_hz as f64 / target_hz as f64;
    let x = &w.samples;
    let mut out = vec![0.0; out_len];
    for (i, o) in out.iter_mut().enumerate() {
        let p = i as f64 * ratio;
        let n0 = math::ceil(p - half_width).max(0.0) as usize;
        let n1 = (math::floor(p + half_width) as usize).min(len - 1);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (n, &xv) in x[n0..=n1].iter().enumerate() {
            let d = math::abs((n0 + n) as f64 - p) * TABLE_OVERSAMPLE as f64;
            let j = d as usize;
            let frac = d - j as f64;
            let h = table[j] + frac * (table[j + 1] - table[j]);
            acc += h * xv;
            wsum += h;
        }
        // unit DC gain per output sample; also compensates edge truncation
        *o = if math::abs(wsum) > 1e-6 { acc / wsum } else { acc };
    }
    Ok(Waveform::new(out, target_hz))
}

fn build_sinc_table(fc: f64, half_width: f64) -> Vec<f64> {
    let n = (half_width * TABLE_OVERSAMPLE as f64) as usize + 2;
    let i0_beta = math::bessel_i0(KAISER_BETA);
    let mut table = Vec::with_capacity(n);
    for j in 0..n {
        let t = j as f64 / TABLE_OVERSAMPLE as f64;
        let h = if t <= half_width {
            let u = t / half_width;
            let win = math::bessel_i0(KAISER_BETA * math::sqrt(1.0 - u * u)) / i0_beta;
            fc * math::sinc(fc * t) * win
        } else {
            0.0
        };
        table.push(h);
    }
    table
}

const NOISE_SINES: usize = 256;
const NOISE_RMS: f64 = 0.15;

/// Pseudorandom noise with no energy above `band_hz`, built as a sum of
/// random sinusoids.
///
/// The sinusoid frequencies and phases depend only on the seed, so the same
/// seed describes one underlying continuous-time signal that can be sampled
/// at any rate; rate-consistency tests rely on this.
pub fn bandlimited_noise(
    duration_s: f64,
    band_hz: f64,
    rate_hz: u32,
    seed: u64,
) -> Result<Waveform, SignalError> {
    if rate_hz == 0 {
        return Err(SignalError::InvalidRate);
    }
    if band_hz <= 0.0 {
        return Err(SignalError::InvalidBand);
    }
    let nyquist = rate_hz as f64 / 2.0;
    if band_hz > nyquist {
        return Err(SignalError::BandAboveNyquist {
            band_hz,
            nyquist_hz: nyquist,
        });
    }

    let mut rng = seed_rng(seed);
    let amp = NOISE_RMS * math::sqrt(2.0 / NOISE_SINES as f64);
    let mut freqs = [0.0; NOISE_SINES];
    let mut phases = [0.0; NOISE_SINES];
    for i in 0..NOISE_SINES {
        freqs[i] = rng.gen_range(0.0..band_hz);
        phases[i] = rng.gen_range(0.0..core::f64::consts::TAU);
    }

    let n = math::round(duration_s * rate_hz as f64).max(0.0) as usize;
    let mut samples = vec![0.0; n];
    for i in 0..NOISE_SINES {
        // phase rotation recurrence instead of per-sample sin()
        let step = core::f64::consts::TAU * freqs[i] / rate_hz as f64;
        let (rot_im, rot_re) = (math::sin(step), math::cos(step));
        let mut re = math::cos(phases[i]);
        let mut im = math::sin(phases[i]);
        for s in samples.iter_mut() {
            *s += amp * im;
            let nre = re * rot_re - im * rot_im;
            im = re * rot_im + im * rot_re;
            re = nre;
        }
    }
    for s in samples.iter_mut() {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok(Waveform::new(samples, rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_length_follows_rate_ratio() {
        let w = Waveform::new(vec![0.0; 16000], 16000);
        let up = resample(&w, 48000).unwrap();
        assert_eq!(up.len(), 48000);
        assert_eq!(up.sample_rate_hz, 48000);
    }

    #[test]
    fn resample_to_same_rate_is_identity() {
        let w = bandlimited_noise(0.1, 3000.0, 16000, 5).unwrap();
        let same = resample(&w, 16000).unwrap();
        assert_eq!(same, w);
    }

    #[test]
    fn noise_is_deterministic_and_sized() {
        let a = bandlimited_noise(1.0, 4000.0, 16000, 7).unwrap();
        let b = bandlimited_noise(1.0, 4000.0, 16000, 7).unwrap();
        assert_eq!(a.len(), 16000);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_duration_gives_empty_waveform() {
        let w = bandlimited_noise(0.0, 1000.0, 8000, 1).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn band_above_nyquist_is_rejected() {
        assert!(matches!(
            bandlimited_noise(0.5, 5000.0, 8000, 1),
            Err(SignalError::BandAboveNyquist { .. })
        ));
    }
}
