//! Sampling-frequency-independent convolution.
//!
//! A latent analog filter gives the layer's frequency response as a function
//! of physical frequency. The filter is a neural analog filter (NAF): a fixed
//! random-Fourier-feature encoding of the normalized frequency followed by a
//! small feedforward net that outputs one complex response per channel pair.
//! For a given sampling rate the digital kernel is designed by sampling the
//! response on the realized kernel's DFT grid and inverse-transforming, so
//! one set of NAF weights yields consistent kernels at every rate.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::nn::{self, NnError, Parameter, Tensor};
use crate::rng::SeedRng;

/// Reference rate at which `base_kernel`/`base_stride` are expressed.
pub const BASE_RATE_HZ: f64 = 16_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfiError {
    #[error("frequency {freq_hz} Hz outside NAF domain [0, {max_freq_hz}]")]
    FreqOutOfDomain { freq_hz: f64, max_freq_hz: f64 },
    #[error("spec channels ({c_out}x{c_in}) do not match NAF output ({naf_c_out}x{naf_c_in})")]
    ChannelMismatch {
        c_out: usize,
        c_in: usize,
        naf_c_out: usize,
        naf_c_in: usize,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Construction knobs for a [`NafParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct NafConfig {
    /// Rows of the fixed RFF projection (feature count is twice this).
    pub rff_features: usize,
    /// Std of the Gaussian the projection entries are drawn from.
    pub rff_scale: f64,
    /// Width of the two hidden layers.
    pub hidden: usize,
    /// Upper edge of the represented frequency band, Hz.
    pub max_freq_hz: f64,
}

impl Default for NafConfig {
    fn default() -> Self {
        NafConfig {
            rff_features: 64,
            rff_scale: 10.0,
            hidden: 256,
            max_freq_hz: 24_000.0,
        }
    }
}

/// One affine stage of the NAF net.
#[derive(Debug, Clone)]
pub struct MlpLayer {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl MlpLayer {
    fn new(out_dim: usize, in_dim: usize, std: f64, rng: &mut SeedRng) -> Self {
        MlpLayer {
            weight: Parameter::new(Tensor::randn(&[out_dim, in_dim], std, rng)),
            bias: Parameter::new(Tensor::zeros(&[out_dim])),
        }
    }
}

/// The latent analog filter: fixed RFF projection plus trainable feedforward
/// weights mapping 2F features to `2 * c_out * c_in` outputs (real and
/// imaginary response per channel pair).
#[derive(Debug, Clone)]
pub struct NafParams {
    rff: Tensor,
    pub layers: Vec<MlpLayer>,
    pub max_freq_hz: f64,
    c_out: usize,
    c_in: usize,
}

impl NafParams {
    pub fn new(c_out: usize, c_in: usize, cfg: &NafConfig, rng: &mut SeedRng) -> Self {
        let feat = 2 * cfg.rff_features;
        let out_dim = 2 * c_out * c_in;
        let layers = vec![
            MlpLayer::new(cfg.hidden, feat, math::sqrt(2.0 / feat as f64), rng),
            MlpLayer::new(cfg.hidden, cfg.hidden, math::sqrt(2.0 / cfg.hidden as f64), rng),
            // modest output gain keeps the response's frequency-Lipschitz
            // constant low enough for smooth cross-rate interpolation
            MlpLayer::new(out_dim, cfg.hidden, 0.1 * math::sqrt(1.0 / cfg.hidden as f64), rng),
        ];
        NafParams {
            rff: Tensor::randn(&[cfg.rff_features], cfg.rff_scale, rng),
            layers,
            max_freq_hz: cfg.max_freq_hz,
            c_out,
            c_in,
        }
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.c_out, self.c_in)
    }

    /// The fixed projection; immutable after construction.
    pub fn rff_matrix(&self) -> &Tensor {
        &self.rff
    }

    /// Rebuilds a NAF from serialized tensors (checkpoint loading).
    pub fn from_parts(
        rff: Tensor,
        layer_tensors: Vec<(Tensor, Tensor)>,
        max_freq_hz: f64,
        c_out: usize,
        c_in: usize,
    ) -> Self {
        let layers = layer_tensors
            .into_iter()
            .map(|(w, b)| MlpLayer {
                weight: Parameter::new(w),
                bias: Parameter::new(b),
            })
            .collect();
        NafParams {
            rff,
            layers,
            max_freq_hz,
            c_out,
            c_in,
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out
    }
}

/// Per-rate realization plan for an SFI layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SfiConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    /// Kernel taps at the 16 kHz reference rate.
    pub base_kernel: usize,
    /// Stride at the 16 kHz reference rate.
    pub base_stride: f64,
    /// NAF domain bound used when clamping the sampled band.
    pub max_freq_hz: f64,
}

impl SfiConvSpec {
    /// Kernel length realized at `rate_hz`: `round(base_kernel * rate / 16000)`.
    pub fn kernel_len_at(&self, rate_hz: u32) -> usize {
        math::round(self.base_kernel as f64 * rate_hz as f64 / BASE_RATE_HZ) as usize
    }

    /// Stride realized at `rate_hz`; fractional strides are expected.
    pub fn stride_at(&self, rate_hz: u32) -> f64 {
        self.base_stride * rate_hz as f64 / BASE_RATE_HZ
    }
}

/// RFF encoding of a frequency: `[cos(2 pi B u) || sin(2 pi B u)]` with
/// `u = freq / max_freq`.
pub fn rff_transform(freq_hz: f64, naf: &NafParams) -> Result<Tensor, SfiError> {
    if !(0.0..=naf.max_freq_hz).contains(&freq_hz) {
        return Err(SfiError::FreqOutOfDomain {
            freq_hz,
            max_freq_hz: naf.max_freq_hz,
        });
    }
    let u = freq_hz / naf.max_freq_hz;
    let f = naf.rff.len();
    let mut out = vec![0.0; 2 * f];
    for (i, &b) in naf.rff.iter().enumerate() {
        let angle = core::f64::consts::TAU * b * u;
        out[i] = math::cos(angle);
        out[f + i] = math::sin(angle);
    }
    Ok(Tensor::from_vec(&[2 * f], out))
}

/// Saved activations for one NAF evaluation, enough to backpropagate.
#[derive(Debug, Clone)]
pub struct NafCache {
    /// Input to each affine stage; `inputs[0]` is the RFF feature vector.
    inputs: Vec<Tensor>,
    /// Pre-activation of each hidden stage.
    preacts: Vec<Tensor>,
}

/// Complex response of the latent filter at one frequency.
#[derive(Debug, Clone)]
pub struct Response {
    pub re: Tensor,
    pub im: Tensor,
}

fn naf_forward(freq_hz: f64, naf: &NafParams) -> Result<(Tensor, NafCache), SfiError> {
    let features = rff_transform(freq_hz, naf)?;
    let mut inputs = vec![features];
    let mut preacts = Vec::with_capacity(naf.layers.len() - 1);
    let last = naf.layers.len() - 1;
    for (i, layer) in naf.layers.iter().enumerate() {
        let z = nn::linear(&inputs[i], &layer.weight.value, &layer.bias.value)?;
        if i < last {
            let a = nn::silu(&z);
            preacts.push(z);
            inputs.push(a);
        } else {
            return Ok((z, NafCache { inputs, preacts }));
        }
    }
    unreachable!("NAF has at least one layer");
}

/// Accumulates gradients into the NAF's trainable layers, given the loss
/// gradient w.r.t. one evaluation's output vector.
fn naf_backward(naf: &mut NafParams, cache: &NafCache, grad_out: &Tensor) -> Result<(), SfiError> {
    let mut g = grad_out.clone();
    for i in (0..naf.layers.len()).rev() {
        let (gx, gw, gb) = nn::linear_backward(&g, &cache.inputs[i], &naf.layers[i].weight.value)?;
        naf.layers[i].weight.grad.axpy(1.0, &gw);
        naf.layers[i].bias.grad.axpy(1.0, &gb);
        if i > 0 {
            g = nn::silu_backward(&gx, &cache.preacts[i - 1]);
        }
    }
    Ok(())
}

/// Latent filter response at `freq_hz`, `[c_out, c_in]` complex.
pub fn naf_response(freq_hz: f64, naf: &NafParams) -> Result<Response, SfiError> {
    let (out, _) = naf_forward(freq_hz, naf)?;
    Ok(split_response(&out, naf.c_out, naf.c_in))
}

/// Accumulates loss gradients into the NAF's trainable layers, given the
/// gradient w.r.t. one response evaluation as an interleaved
/// `[re, im, re, im, ...]` vector of length `2 * c_out * c_in`.
pub fn naf_response_backward(
    freq_hz: f64,
    naf: &mut NafParams,
    grad_out: &Tensor,
) -> Result<(), SfiError> {
    let (_, cache) = naf_forward(freq_hz, naf)?;
    naf_backward(naf, &cache, grad_out)
}

fn split_response(out: &Tensor, c_out: usize, c_in: usize) -> Response {
    let n = c_out * c_in;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for p in 0..n {
        re[p] = out.data()[2 * p];
        im[p] = out.data()[2 * p + 1];
    }
    Response {
        re: Tensor::from_vec(&[c_out, c_in], re),
        im: Tensor::from_vec(&[c_out, c_in], im),
    }
}

/// Everything needed to push a kernel gradient back into the NAF.
#[derive(Debug, Clone)]
pub struct DesignCache {
    bin_caches: Vec<NafCache>,
    kernel_len: usize,
}

/// Designs the digital kernel realized at `rate_hz` by frequency sampling.
///
/// The response is evaluated on the DFT grid of the realized kernel
/// (frequencies up to Nyquist, clamped to the NAF domain); bins above Nyquist
/// follow by conjugate symmetry so the taps come out real. The 1/K factor of
/// the inverse DFT equals grid-spacing/rate, which is what makes the realized
/// response interpolate the same latent samples at every rate; no further
/// scaling is applied, so layer outputs are rate-consistent.
pub fn design_kernel(
    naf: &NafParams,
    spec: &SfiConvSpec,
    rate_hz: u32,
) -> Result<Tensor, SfiError> {
    let (taps, _) = design_kernel_with_cache(naf, spec, rate_hz)?;
    Ok(taps)
}

/// [`design_kernel`] plus the cache needed by [`design_kernel_backward`].
pub fn design_kernel_with_cache(
    naf: &NafParams,
    spec: &SfiConvSpec,
    rate_hz: u32,
) -> Result<(Tensor, DesignCache), SfiError> {
    if (spec.c_out, spec.c_in) != (naf.c_out, naf.c_in) {
        return Err(SfiError::ChannelMismatch {
            c_out: spec.c_out,
            c_in: spec.c_in,
            naf_c_out: naf.c_out,
            naf_c_in: naf.c_in,
        });
    }
    let k = spec.kernel_len_at(rate_hz);
    let pairs = spec.c_out * spec.c_in;
    let half = k / 2;

    let mut bin_caches = Vec::with_capacity(half + 1);
    let mut bin_re = Vec::with_capacity(half + 1);
    let mut bin_im = Vec::with_capacity(half + 1);
    for bin in 0..=half {
        let freq = (bin as f64 * rate_hz as f64 / k as f64).min(spec.max_freq_hz);
        let (out, cache) = naf_forward(freq, naf)?;
        let mut re = vec![0.0; pairs];
        let mut im = vec![0.0; pairs];
        for p in 0..pairs {
            re[p] = out.data()[2 * p];
            im[p] = out.data()[2 * p + 1];
        }
        bin_caches.push(cache);
        bin_re.push(re);
        bin_im.push(im);
    }

    let taps = hermitian_idft(&bin_re, &bin_im, k, pairs);
    Ok((
        Tensor::from_vec(&[spec.c_out, spec.c_in, k], taps),
        DesignCache {
            bin_caches,
            kernel_len: k,
        },
    ))
}

/// Real inverse DFT with Hermitian completion over bins `0..=k/2`; DC (and
/// Nyquist for even K) take the real part so taps stay real.
fn hermitian_idft(bin_re: &[Vec<f64>], bin_im: &[Vec<f64>], k: usize, pairs: usize) -> Vec<f64> {
    let half = k / 2;
    let nyquist_bin = if k % 2 == 0 { Some(half) } else { None };
    let mut taps = vec![0.0; pairs * k];
    for p in 0..pairs {
        for n in 0..k {
            let mut acc = bin_re[0][p];
            for bin in 1..=half {
                if Some(bin) == nyquist_bin {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    acc += bin_re[bin][p] * sign;
                } else {
                    let angle = core::f64::consts::TAU * bin as f64 * n as f64 / k as f64;
                    acc +=
                        2.0 * (bin_re[bin][p] * math::cos(angle) - bin_im[bin][p] * math::sin(angle));
                }
            }
            taps[p * k + n] = acc / k as f64;
        }
    }
    taps
}

/// Backpropagates a kernel-tap gradient into the NAF's trainable weights.
pub fn design_kernel_backward(
    naf: &mut NafParams,
    cache: &DesignCache,
    grad_taps: &Tensor,
) -> Result<(), SfiError> {
    let k = cache.kernel_len;
    let pairs = naf.c_out * naf.c_in;
    debug_assert_eq!(grad_taps.shape(), [naf.c_out, naf.c_in, k]);
    let half = k / 2;
    let nyquist_bin = if k % 2 == 0 { Some(half) } else { None };
    let g = grad_taps.data();
    let unit = 1.0 / k as f64;

    for bin in 0..=half {
        let mut grad_out = vec![0.0; 2 * pairs];
        for p in 0..pairs {
            let gp = &g[p * k..(p + 1) * k];
            let (mut gre, mut gim) = (0.0, 0.0);
            if bin == 0 {
                for &gv in gp {
                    gre += gv;
                }
            } else if Some(bin) == nyquist_bin {
                for (n, &gv) in gp.iter().enumerate() {
                    gre += if n % 2 == 0 { gv } else { -gv };
                }
            } else {
                for (n, &gv) in gp.iter().enumerate() {
                    let angle = core::f64::consts::TAU * bin as f64 * n as f64 / k as f64;
                    gre += 2.0 * math::cos(angle) * gv;
                    gim -= 2.0 * math::sin(angle) * gv;
                }
            }
            grad_out[2 * p] = unit * gre;
            grad_out[2 * p + 1] = unit * gim;
        }
        naf_backward(
            naf,
            &cache.bin_caches[bin],
            &Tensor::from_vec(&[2 * pairs], grad_out),
        )?;
    }
    Ok(())
}

/// Designs the kernel for the input's rate and convolves with the realized
/// stride. Output frame rate is rate-independent.
pub fn sfi_conv_forward(
    input: &Tensor,
    naf: &NafParams,
    spec: &SfiConvSpec,
    rate_hz: u32,
) -> Result<Tensor, SfiError> {
    let taps = design_kernel(naf, spec, rate_hz)?;
    Ok(nn::conv1d(input, &taps, spec.stride_at(rate_hz))?)
}

/// Realizes a reference 16 kHz kernel at another rate: samples its DTFT on
/// the realized kernel's DFT grid and applies the same inverse transform the
/// NAF design uses. At triple the reference rate this is exact (the longer
/// kernel embeds the reference with zero-stuffing); at non-integer ratios it
/// is the closest frequency-sampled realization.
pub fn realize_kernel_at(reference_16k: &Tensor, spec: &SfiConvSpec, rate_hz: u32) -> Tensor {
    let (c_out, c_in, k16) = (
        reference_16k.shape()[0],
        reference_16k.shape()[1],
        reference_16k.shape()[2],
    );
    let k = spec.kernel_len_at(rate_hz);
    let pairs = c_out * c_in;
    let half = k / 2;
    let mut bin_re = vec![vec![0.0; pairs]; half + 1];
    let mut bin_im = vec![vec![0.0; pairs]; half + 1];
    for bin in 0..=half {
        let freq = bin as f64 * rate_hz as f64 / k as f64;
        for p in 0..pairs {
            let (mut re, mut im) = (0.0, 0.0);
            for d in 0..k16 {
                let angle = core::f64::consts::TAU * freq * d as f64 / BASE_RATE_HZ;
                re += reference_16k.data()[p * k16 + d] * math::cos(angle);
                im -= reference_16k.data()[p * k16 + d] * math::sin(angle);
            }
            bin_re[bin][p] = re;
            bin_im[bin][p] = im;
        }
    }
    let taps = hermitian_idft(&bin_re, &bin_im, k, pairs);
    Tensor::from_vec(&[c_out, c_in, k], taps)
}

/// Fits the NAF so its designed kernels match a 16 kHz reference kernel
/// realized at each given rate. This is the layer-level counterpart of the
/// distillation protocol; it pins the latent response on the shared design
/// lattice, which is what makes the designed kernels rate-consistent.
/// Returns the final relative fit residual.
pub fn fit_reference_kernel(
    naf: &mut NafParams,
    spec: &SfiConvSpec,
    reference_16k: &Tensor,
    rates: &[u32],
    steps: usize,
    lr: f64,
) -> Result<f64, SfiError> {
    let targets: Vec<(u32, Tensor)> = rates
        .iter()
        .map(|&r| (r, realize_kernel_at(reference_16k, spec, r)))
        .collect();
    let mut residual = 0.0;
    for _ in 0..steps {
        let mut loss = 0.0;
        let mut norm = 0.0;
        for (rate, target) in &targets {
            let (taps, cache) = design_kernel_with_cache(naf, spec, *rate)?;
            let mut grad = taps;
            grad.axpy(-1.0, target);
            loss += grad.iter().map(|g| g * g).sum::<f64>();
            norm += target.iter().map(|v| v * v).sum::<f64>();
            grad.scale(2.0);
            design_kernel_backward(naf, &cache, &grad)?;
        }
        nn::adam_step(naf.params_mut(), lr, 0.9, 0.999, 1e-8);
        residual = math::sqrt(loss / norm.max(1e-300));
    }
    Ok(residual)
}
