//! Encoders and prediction heads: fixed-rate teacher, SFI student, the
//! listener-conditioned MOS head, and the rate-embedding baseline.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::nn::{self, NnError, Parameter, Tensor};
use crate::rng::SeedRng;
use crate::sfi::{self, NafConfig, NafParams, SfiConvSpec, SfiError};
use crate::signal::{self, SignalError, Waveform};

/// Rates the SFI student accepts.
pub const SUPPORTED_RATES: [u32; 4] = [8_000, 16_000, 24_000, 48_000];
/// Rates carried by rated pipeline inputs (the track's set).
pub const TRACK_RATES: [u32; 3] = [16_000, 24_000, 48_000];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("expected input at {expected} Hz, got {got} Hz")]
    WrongRate { expected: u32, got: u32 },
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("model list is empty")]
    EmptyModelList,
    #[error("listener list is empty")]
    EmptyListenerList,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sfi(#[from] SfiError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Layer plan shared by teacher and student; the two differ only in how
/// layer 1 obtains its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Channel count of every block; also the head feature dimension.
    pub dim: usize,
    /// Layer-1 kernel taps at the 16 kHz reference rate.
    pub base_kernel: usize,
    /// Layer-1 stride at the 16 kHz reference rate.
    pub base_stride: f64,
    /// Kernel length of layers 2..L.
    pub deep_kernel: usize,
    /// Strides of layers 2..L; the encoder has `1 + deep_strides.len()` layers.
    pub deep_strides: Vec<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            base_kernel: 10,
            base_stride: 5.0,
            deep_kernel: 4,
            deep_strides: vec![4, 4, 2],
        }
    }
}

impl EncoderConfig {
    pub fn num_layers(&self) -> usize {
        1 + self.deep_strides.len()
    }

    pub fn sfi_spec(&self, max_freq_hz: f64) -> SfiConvSpec {
        SfiConvSpec {
            c_in: 1,
            c_out: self.dim,
            base_kernel: self.base_kernel,
            base_stride: self.base_stride,
            max_freq_hz,
        }
    }
}

/// Per-layer feature maps `[C, T_l]`, post-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub layers: Vec<Tensor>,
}

impl FeatureStack {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn last(&self) -> &Tensor {
        self.layers.last().expect("non-empty stack")
    }
}

/// Ordinary convolution block: conv, per-channel bias, SiLU.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub weight: Parameter,
    pub bias: Parameter,
    pub stride: f64,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    input: Tensor,
    preact: Tensor,
}

impl ConvBlock {
    fn new(c_out: usize, c_in: usize, kernel: usize, stride: f64, rng: &mut SeedRng) -> Self {
        let std = crate::math::sqrt(2.0 / (c_in * kernel) as f64);
        ConvBlock {
            weight: Parameter::new(Tensor::randn(&[c_out, c_in, kernel], std, rng)),
            bias: Parameter::new(Tensor::zeros(&[c_out])),
            stride,
        }
    }

    fn forward(&self, input: &Tensor, want_cache: bool) -> Result<(Tensor, Option<BlockCache>), NnError> {
        let mut z = nn::conv1d(input, &self.weight.value, self.stride)?;
        add_channel_bias(&mut z, &self.bias.value);
        let h = nn::silu(&z);
        let cache = want_cache.then(|| BlockCache {
            input: input.clone(),
            preact: z,
        });
        Ok((h, cache))
    }

    /// Returns the gradient w.r.t. the block input.
    fn backward(&mut self, cache: &BlockCache, grad_h: &Tensor) -> Result<Tensor, NnError> {
        let gz = nn::silu_backward(grad_h, &cache.preact);
        accumulate_channel_bias_grad(&mut self.bias.grad, &gz);
        let (gx, gw) = nn::conv1d_backward(&gz, &cache.input, &self.weight.value, self.stride)?;
        self.weight.grad.axpy(1.0, &gw);
        Ok(gx)
    }
}

fn add_channel_bias(z: &mut Tensor, bias: &Tensor) {
    let (c, t) = (z.shape()[0], z.shape()[1]);
    let data = z.data_mut();
    for ch in 0..c {
        let b = bias.data()[ch];
        for v in &mut data[ch * t..(ch + 1) * t] {
            *v += b;
        }
    }
}

fn accumulate_channel_bias_grad(bias_grad: &mut Tensor, gz: &Tensor) {
    let (c, t) = (gz.shape()[0], gz.shape()[1]);
    for ch in 0..c {
        let mut acc = 0.0;
        for &v in &gz.data()[ch * t..(ch + 1) * t] {
            acc += v;
        }
        bias_grad.data_mut()[ch] += acc;
    }
}

fn waveform_tensor(x: &Waveform) -> Tensor {
    Tensor::from_vec(&[1, x.samples.len()], x.samples.clone())
}

/// Fixed-rate (16 kHz) encoder used as the frozen distillation teacher and as
/// the baseline's feature extractor.
#[derive(Debug, Clone)]
pub struct TeacherEncoder {
    pub blocks: Vec<ConvBlock>,
    pub config: EncoderConfig,
}

#[derive(Debug, Clone)]
pub struct TeacherCache {
    blocks: Vec<BlockCache>,
}

impl TeacherEncoder {
    pub fn new(config: &EncoderConfig, rng: &mut SeedRng) -> Self {
        let mut blocks = Vec::with_capacity(config.num_layers());
        blocks.push(ConvBlock::new(
            config.dim,
            1,
            config.base_kernel,
            config.base_stride,
            rng,
        ));
        for &s in &config.deep_strides {
            blocks.push(ConvBlock::new(
                config.dim,
                config.dim,
                config.deep_kernel,
                s as f64,
                rng,
            ));
        }
        TeacherEncoder {
            blocks,
            config: config.clone(),
        }
    }

    /// Feature stack for a 16 kHz waveform; the input rate is enforced.
    pub fn features(&self, x: &Waveform) -> Result<FeatureStack, ModelError> {
        if x.sample_rate_hz != 16_000 {
            return Err(ModelError::WrongRate {
                expected: 16_000,
                got: x.sample_rate_hz,
            });
        }
        Ok(self.forward_tensor(&waveform_tensor(x), false)?.0)
    }

    pub fn forward_tensor(
        &self,
        input: &Tensor,
        want_cache: bool,
    ) -> Result<(FeatureStack, Option<TeacherCache>), ModelError> {
        let mut layers = Vec::with_capacity(self.blocks.len());
        let mut caches = Vec::new();
        let mut x = input.clone();
        for block in &self.blocks {
            let (h, cache) = block.forward(&x, want_cache)?;
            if let Some(c) = cache {
                caches.push(c);
            }
            layers.push(h.clone());
            x = h;
        }
        Ok((
            FeatureStack { layers },
            want_cache.then_some(TeacherCache { blocks: caches }),
        ))
    }

    /// Backpropagates per-layer feature gradients, accumulating into this
    /// encoder's parameters.
    pub fn backward(
        &mut self,
        cache: &TeacherCache,
        grad_layers: &[Option<Tensor>],
    ) -> Result<(), ModelError> {
        debug_assert_eq!(grad_layers.len(), self.blocks.len());
        let mut upstream: Option<Tensor> = None;
        for i in (0..self.blocks.len()).rev() {
            let mut g = match (upstream.take(), &grad_layers[i]) {
                (Some(mut u), Some(extra)) => {
                    u.axpy(1.0, extra);
                    u
                }
                (Some(u), None) => u,
                (None, Some(extra)) => extra.clone(),
                (None, None) => continue,
            };
            if !g.iter().any(|&v| v != 0.0) {
                continue;
            }
            g = self.blocks[i].backward(&cache.blocks[i], &g)?;
            if i > 0 {
                upstream = Some(g);
            }
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out
    }
}

/// SFI student encoder: layer 1 designs its kernel per input rate from the
/// NAF; layers 2..L are ordinary blocks shaped like the teacher's.
#[derive(Debug, Clone)]
pub struct StudentEncoder {
    pub naf: NafParams,
    pub spec: SfiConvSpec,
    pub bias1: Parameter,
    pub deep: Vec<ConvBlock>,
    pub config: EncoderConfig,
}

#[derive(Debug, Clone)]
pub struct StudentCache {
    design: sfi::DesignCache,
    taps: Tensor,
    rate_hz: u32,
    layer1_input: Tensor,
    layer1_preact: Tensor,
    deep: Vec<BlockCache>,
}

impl StudentEncoder {
    pub fn new(config: &EncoderConfig, naf_cfg: &NafConfig, rng: &mut SeedRng) -> Self {
        let teacher = TeacherEncoder::new(config, rng);
        Self::from_teacher_blocks(teacher, config, naf_cfg, rng)
    }

    /// Student whose deep layers start as copies of a trained teacher; the
    /// SFI layer starts from a fresh NAF.
    pub fn init_from_teacher(
        teacher: &TeacherEncoder,
        naf_cfg: &NafConfig,
        rng: &mut SeedRng,
    ) -> Self {
        Self::from_teacher_blocks(teacher.clone(), &teacher.config.clone(), naf_cfg, rng)
    }

    fn from_teacher_blocks(
        teacher: TeacherEncoder,
        config: &EncoderConfig,
        naf_cfg: &NafConfig,
        rng: &mut SeedRng,
    ) -> Self {
        let naf = NafParams::new(config.dim, 1, naf_cfg, rng);
        let spec = config.sfi_spec(naf_cfg.max_freq_hz);
        let deep = teacher.blocks.into_iter().skip(1).collect();
        StudentEncoder {
            naf,
            spec,
            bias1: Parameter::new(Tensor::zeros(&[config.dim])),
            deep,
            config: config.clone(),
        }
    }

    /// Feature stack for a waveform at any supported rate.
    pub fn features(&self, x: &Waveform) -> Result<FeatureStack, ModelError> {
        if !SUPPORTED_RATES.contains(&x.sample_rate_hz) {
            return Err(ModelError::UnsupportedRate(x.sample_rate_hz));
        }
        Ok(self
            .forward_tensor(&waveform_tensor(x), x.sample_rate_hz, false)?
            .0)
    }

    pub fn forward_tensor(
        &self,
        input: &Tensor,
        rate_hz: u32,
        want_cache: bool,
    ) -> Result<(FeatureStack, Option<StudentCache>), ModelError> {
        let (taps, design) = sfi::design_kernel_with_cache(&self.naf, &self.spec, rate_hz)?;
        let mut z = nn::conv1d(input, &taps, self.spec.stride_at(rate_hz))?;
        add_channel_bias(&mut z, &self.bias1.value);
        let h1 = nn::silu(&z);

        let mut layers = Vec::with_capacity(self.config.num_layers());
        let mut deep_caches = Vec::new();
        layers.push(h1.clone());
        let mut x = h1;
        for block in &self.deep {
            let (h, cache) = block.forward(&x, want_cache)?;
            if let Some(c) = cache {
                deep_caches.push(c);
            }
            layers.push(h.clone());
            x = h;
        }
        let cache = want_cache.then(|| StudentCache {
            design,
            taps,
            rate_hz,
            layer1_input: input.clone(),
            layer1_preact: z,
            deep: deep_caches,
        });
        Ok((FeatureStack { layers }, cache))
    }

    /// Backpropagates per-layer feature gradients through the deep blocks and
    /// the kernel design into the NAF.
    pub fn backward(
        &mut self,
        cache: &StudentCache,
        grad_layers: &[Option<Tensor>],
    ) -> Result<(), ModelError> {
        debug_assert_eq!(grad_layers.len(), 1 + self.deep.len());
        let mut upstream: Option<Tensor> = None;
        for i in (0..self.deep.len()).rev() {
            let g = match (upstream.take(), &grad_layers[i + 1]) {
                (Some(mut u), Some(extra)) => {
                    u.axpy(1.0, extra);
                    u
                }
                (Some(u), None) => u,
                (None, Some(extra)) => extra.clone(),
                (None, None) => continue,
            };
            upstream = Some(self.deep[i].backward(&cache.deep[i], &g)?);
        }
        let grad_h1 = match (upstream.take(), &grad_layers[0]) {
            (Some(mut u), Some(extra)) => {
                u.axpy(1.0, extra);
                u
            }
            (Some(u), None) => u,
            (None, Some(extra)) => extra.clone(),
            (None, None) => return Ok(()),
        };
        let gz = nn::silu_backward(&grad_h1, &cache.layer1_preact);
        accumulate_channel_bias_grad(&mut self.bias1.grad, &gz);
        let (_, grad_taps) = nn::conv1d_backward(
            &gz,
            &cache.layer1_input,
            &cache.taps,
            self.spec.stride_at(cache.rate_hz),
        )?;
        sfi::design_kernel_backward(&mut self.naf, &cache.design, &grad_taps)?;
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.naf.params_mut();
        out.push(&mut self.bias1);
        for b in &mut self.deep {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out
    }
}

/// Mean over frames: `[C, T] -> [C]`.
pub fn mean_pool(features: &Tensor) -> Tensor {
    let (c, t) = (features.shape()[0], features.shape()[1]);
    let mut out = vec![0.0; c];
    for (ch, o) in out.iter_mut().enumerate() {
        let row = &features.data()[ch * t..(ch + 1) * t];
        *o = row.iter().sum::<f64>() / t as f64;
    }
    Tensor::from_vec(&[c], out)
}

fn mean_pool_backward(grad_vec: &Tensor, t: usize) -> Tensor {
    let c = grad_vec.len();
    let mut out = vec![0.0; c * t];
    for ch in 0..c {
        let g = grad_vec.data()[ch] / t as f64;
        for v in &mut out[ch * t..(ch + 1) * t] {
            *v = g;
        }
    }
    Tensor::from_vec(&[c, t], out)
}

/// Listener-conditioned prediction head: listener embedding added to the
/// pooled features, then a 2-layer net to the normalized score.
#[derive(Debug, Clone)]
pub struct MosHead {
    pub listener_table: Parameter,
    pub fc1_weight: Parameter,
    pub fc1_bias: Parameter,
    pub fc2_weight: Parameter,
    pub fc2_bias: Parameter,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    listener_id: usize,
    summed: Tensor,
    z1: Tensor,
    a1: Tensor,
}

impl MosHead {
    pub fn new(num_listeners: usize, dim: usize, rng: &mut SeedRng) -> Self {
        MosHead {
            listener_table: Parameter::new(Tensor::randn(&[num_listeners, dim], 0.1, rng)),
            fc1_weight: Parameter::new(Tensor::randn(
                &[dim, dim],
                crate::math::sqrt(2.0 / dim as f64),
                rng,
            )),
            fc1_bias: Parameter::new(Tensor::zeros(&[dim])),
            fc2_weight: Parameter::new(Tensor::randn(
                &[1, dim],
                crate::math::sqrt(1.0 / dim as f64),
                rng,
            )),
            fc2_bias: Parameter::new(Tensor::zeros(&[1])),
        }
    }

    pub fn num_listeners(&self) -> usize {
        self.listener_table.value.shape()[0]
    }

    /// Normalized score for a pooled feature vector and listener.
    pub fn score_vector(
        &self,
        pooled: &Tensor,
        listener_id: usize,
    ) -> Result<(f64, HeadCache), ModelError> {
        let emb = nn::embedding(&self.listener_table.value, listener_id)?;
        let mut summed = pooled.clone();
        summed.axpy(1.0, &emb);
        let z1 = nn::linear(&summed, &self.fc1_weight.value, &self.fc1_bias.value)?;
        let a1 = nn::silu(&z1);
        let out = nn::linear(&a1, &self.fc2_weight.value, &self.fc2_bias.value)?;
        Ok((
            out.data()[0],
            HeadCache {
                listener_id,
                summed,
                z1,
                a1,
            },
        ))
    }

    /// Backpropagates a scalar score gradient; returns the gradient w.r.t.
    /// the pooled feature vector.
    pub fn backward(&mut self, cache: &HeadCache, grad_score: f64) -> Result<Tensor, ModelError> {
        let g2 = Tensor::from_vec(&[1], vec![grad_score]);
        let (ga1, gw2, gb2) = nn::linear_backward(&g2, &cache.a1, &self.fc2_weight.value)?;
        self.fc2_weight.grad.axpy(1.0, &gw2);
        self.fc2_bias.grad.axpy(1.0, &gb2);
        let gz1 = nn::silu_backward(&ga1, &cache.z1);
        let (gsum, gw1, gb1) = nn::linear_backward(&gz1, &cache.summed, &self.fc1_weight.value)?;
        self.fc1_weight.grad.axpy(1.0, &gw1);
        self.fc1_bias.grad.axpy(1.0, &gb1);
        nn::embedding_backward(&mut self.listener_table.grad, cache.listener_id, &gsum);
        Ok(gsum)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.listener_table,
            &mut self.fc1_weight,
            &mut self.fc1_bias,
            &mut self.fc2_weight,
            &mut self.fc2_bias,
        ]
    }
}

/// Normalized score for a feature stack: temporal mean pool of the last
/// layer, listener embedding, 2-layer net.
pub fn predict_listener_score(
    features: &FeatureStack,
    listener_id: usize,
    head: &MosHead,
) -> Result<f64, ModelError> {
    let pooled = mean_pool(features.last());
    Ok(head.score_vector(&pooled, listener_id)?.0)
}

/// Score normalization: `(S - 2) / 3` maps [1, 5] to [-1/3, 1].
pub fn normalize_score(s: f64) -> f64 {
    (s - 2.0) / 3.0
}

/// Inverse of [`normalize_score`].
pub fn denormalize_score(s_norm: f64) -> f64 {
    3.0 * s_norm + 2.0
}

/// Rate-conditioned embedding used by the baseline instead of an SFI layer.
#[derive(Debug, Clone)]
pub struct SfEmbedding {
    pub table: Parameter,
}

impl SfEmbedding {
    pub fn new(dim: usize, rng: &mut SeedRng) -> Self {
        SfEmbedding {
            table: Parameter::new(Tensor::randn(&[TRACK_RATES.len(), dim], 0.1, rng)),
        }
    }

    pub fn rate_index(rate_hz: u32) -> Option<usize> {
        TRACK_RATES.iter().position(|&r| r == rate_hz)
    }
}

/// Baseline features: resample to 16 kHz, encode with a fixed-rate encoder,
/// pool, and add the rate embedding for the original rate. The listener
/// embedding joins downstream in the head.
pub fn baseline_features(
    x: &Waveform,
    encoder: &TeacherEncoder,
    sf_emb: &SfEmbedding,
) -> Result<Tensor, ModelError> {
    let idx =
        SfEmbedding::rate_index(x.sample_rate_hz).ok_or(ModelError::UnsupportedRate(x.sample_rate_hz))?;
    let x16 = signal::resample(x, 16_000)?;
    let (stack, _) = encoder.forward_tensor(&waveform_tensor(&x16), false)?;
    let mut pooled = mean_pool(stack.last());
    let emb = nn::embedding(&sf_emb.table.value, idx)?;
    pooled.axpy(1.0, &emb);
    Ok(pooled)
}

/// Feature extractor ahead of the MOS head.
#[derive(Debug, Clone)]
pub enum Frontend {
    Sfi(StudentEncoder),
    Baseline {
        encoder: TeacherEncoder,
        sf_emb: SfEmbedding,
    },
}

/// Cache for one frontend forward pass in training mode.
#[derive(Debug, Clone)]
pub enum FrontendCache {
    Sfi { cache: StudentCache, frames: usize },
    Baseline {
        cache: TeacherCache,
        frames: usize,
        rate_index: usize,
    },
}

impl Frontend {
    pub fn dim(&self) -> usize {
        match self {
            Frontend::Sfi(s) => s.config.dim,
            Frontend::Baseline { encoder, .. } => encoder.config.dim,
        }
    }

    /// Pooled feature vector for inference.
    pub fn pooled(&self, x: &Waveform) -> Result<Tensor, ModelError> {
        match self {
            Frontend::Sfi(student) => Ok(mean_pool(student.features(x)?.last())),
            Frontend::Baseline { encoder, sf_emb } => baseline_features(x, encoder, sf_emb),
        }
    }

    /// Pooled feature vector plus the cache needed to backpropagate.
    pub fn forward_train(&self, x: &Waveform) -> Result<(Tensor, FrontendCache), ModelError> {
        match self {
            Frontend::Sfi(student) => {
                if !SUPPORTED_RATES.contains(&x.sample_rate_hz) {
                    return Err(ModelError::UnsupportedRate(x.sample_rate_hz));
                }
                let (stack, cache) =
                    student.forward_tensor(&waveform_tensor(x), x.sample_rate_hz, true)?;
                let frames = stack.last().shape()[1];
                Ok((
                    mean_pool(stack.last()),
                    FrontendCache::Sfi {
                        cache: cache.expect("cache requested"),
                        frames,
                    },
                ))
            }
            Frontend::Baseline { encoder, sf_emb } => {
                let rate_index = SfEmbedding::rate_index(x.sample_rate_hz)
                    .ok_or(ModelError::UnsupportedRate(x.sample_rate_hz))?;
                let x16 = signal::resample(x, 16_000)?;
                let (stack, cache) = encoder.forward_tensor(&waveform_tensor(&x16), true)?;
                let frames = stack.last().shape()[1];
                let mut pooled = mean_pool(stack.last());
                let emb = nn::embedding(&sf_emb.table.value, rate_index)?;
                pooled.axpy(1.0, &emb);
                Ok((
                    pooled,
                    FrontendCache::Baseline {
                        cache: cache.expect("cache requested"),
                        frames,
                        rate_index,
                    },
                ))
            }
        }
    }

    /// Accumulates the pooled-feature gradient into the frontend parameters.
    pub fn backward(&mut self, cache: &FrontendCache, grad_pooled: &Tensor) -> Result<(), ModelError> {
        match (self, cache) {
            (Frontend::Sfi(student), FrontendCache::Sfi { cache, frames }) => {
                let grad_last = mean_pool_backward(grad_pooled, *frames);
                let mut grads: Vec<Option<Tensor>> = vec![None; student.config.num_layers()];
                *grads.last_mut().expect("non-empty") = Some(grad_last);
                student.backward(cache, &grads)
            }
            (
                Frontend::Baseline { encoder, sf_emb },
                FrontendCache::Baseline {
                    cache,
                    frames,
                    rate_index,
                },
            ) => {
                nn::embedding_backward(&mut sf_emb.table.grad, *rate_index, grad_pooled);
                let grad_last = mean_pool_backward(grad_pooled, *frames);
                let mut grads: Vec<Option<Tensor>> = vec![None; encoder.config.num_layers()];
                *grads.last_mut().expect("non-empty") = Some(grad_last);
                encoder.backward(cache, &grads)
            }
            _ => unreachable!("cache kind matches frontend kind"),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Frontend::Sfi(student) => student.params_mut(),
            Frontend::Baseline { encoder, sf_emb } => {
                let mut out = encoder.params_mut();
                out.push(&mut sf_emb.table);
                out
            }
        }
    }
}

/// One cross-validation fold's trained model.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub frontend: Frontend,
    pub head: MosHead,
}

// Checkpoint name mapping. Trainable parameters appear under stable names in
// the same order as `params_mut`; the student additionally carries the fixed
// RFF projection so a checkpoint is self-contained.

use crate::checkpoint::{find_shaped, CheckpointError};
use alloc::format;
use alloc::string::String;

impl TeacherEncoder {
    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("teacher/conv{}.weight", i + 1), b.weight.value.clone()));
            out.push((format!("teacher/conv{}.bias", i + 1), b.bias.value.clone()));
        }
        out
    }

    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<(), CheckpointError> {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let w = find_shaped(entries, &format!("teacher/conv{}.weight", i + 1), b.weight.value.shape())?;
            let bias = find_shaped(entries, &format!("teacher/conv{}.bias", i + 1), b.bias.value.shape())?;
            b.weight.reset_to(w.clone());
            b.bias.reset_to(bias.clone());
        }
        Ok(())
    }
}

impl StudentEncoder {
    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        out.push((String::from("naf/rff"), self.naf.rff_matrix().clone()));
        for (i, layer) in self.naf.layers.iter().enumerate() {
            out.push((format!("naf/fc{}.weight", i + 1), layer.weight.value.clone()));
            out.push((format!("naf/fc{}.bias", i + 1), layer.bias.value.clone()));
        }
        out.push((String::from("student/sfi.bias"), self.bias1.value.clone()));
        for (i, b) in self.deep.iter().enumerate() {
            out.push((format!("student/conv{}.weight", i + 2), b.weight.value.clone()));
            out.push((format!("student/conv{}.bias", i + 2), b.bias.value.clone()));
        }
        out
    }

    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<(), CheckpointError> {
        let rff = find_shaped(entries, "naf/rff", self.naf.rff_matrix().shape())?.clone();
        let mut layer_tensors = Vec::with_capacity(self.naf.layers.len());
        for (i, layer) in self.naf.layers.iter().enumerate() {
            let w = find_shaped(entries, &format!("naf/fc{}.weight", i + 1), layer.weight.value.shape())?;
            let b = find_shaped(entries, &format!("naf/fc{}.bias", i + 1), layer.bias.value.shape())?;
            layer_tensors.push((w.clone(), b.clone()));
        }
        let (c_out, c_in) = self.naf.channels();
        self.naf = crate::sfi::NafParams::from_parts(
            rff,
            layer_tensors,
            self.naf.max_freq_hz,
            c_out,
            c_in,
        );
        let bias1 = find_shaped(entries, "student/sfi.bias", self.bias1.value.shape())?;
        self.bias1.reset_to(bias1.clone());
        for (i, b) in self.deep.iter_mut().enumerate() {
            let w = find_shaped(entries, &format!("student/conv{}.weight", i + 2), b.weight.value.shape())?;
            let bias = find_shaped(entries, &format!("student/conv{}.bias", i + 2), b.bias.value.shape())?;
            b.weight.reset_to(w.clone());
            b.bias.reset_to(bias.clone());
        }
        Ok(())
    }
}

impl MosHead {
    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        alloc::vec![
            (String::from("head/listeners"), self.listener_table.value.clone()),
            (String::from("head/fc1.weight"), self.fc1_weight.value.clone()),
            (String::from("head/fc1.bias"), self.fc1_bias.value.clone()),
            (String::from("head/fc2.weight"), self.fc2_weight.value.clone()),
            (String::from("head/fc2.bias"), self.fc2_bias.value.clone()),
        ]
    }

    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<(), CheckpointError> {
        let t = find_shaped(entries, "head/listeners", self.listener_table.value.shape())?;
        self.listener_table.reset_to(t.clone());
        let w1 = find_shaped(entries, "head/fc1.weight", self.fc1_weight.value.shape())?;
        self.fc1_weight.reset_to(w1.clone());
        let b1 = find_shaped(entries, "head/fc1.bias", self.fc1_bias.value.shape())?;
        self.fc1_bias.reset_to(b1.clone());
        let w2 = find_shaped(entries, "head/fc2.weight", self.fc2_weight.value.shape())?;
        self.fc2_weight.reset_to(w2.clone());
        let b2 = find_shaped(entries, "head/fc2.bias", self.fc2_bias.value.shape())?;
        self.fc2_bias.reset_to(b2.clone());
        Ok(())
    }
}

impl SfEmbedding {
    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        alloc::vec![(String::from("sfemb/table"), self.table.value.clone())]
    }

    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<(), CheckpointError> {
        let t = find_shaped(entries, "sfemb/table", self.table.value.shape())?;
        self.table.reset_to(t.clone());
        Ok(())
    }
}

impl Frontend {
    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        match self {
            Frontend::Sfi(s) => s.named_values(),
            Frontend::Baseline { encoder, sf_emb } => {
                let mut out = encoder.named_values();
                out.extend(sf_emb.named_values());
                out
            }
        }
    }

    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<(), CheckpointError> {
        match self {
            Frontend::Sfi(s) => s.load_named(entries),
            Frontend::Baseline { encoder, sf_emb } => {
                encoder.load_named(entries)?;
                sf_emb.load_named(entries)
            }
        }
    }
}

impl FoldModel {
    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        let mut out = self.frontend.named_values();
        out.extend(self.head.named_values());
        out
    }

    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<(), CheckpointError> {
        self.frontend.load_named(entries)?;
        self.head.load_named(entries)
    }
}

/// Named optimizer state for resumable training: per trainable parameter,
/// `<name>.adam_m`, `<name>.adam_v`, and a 1-element `<name>.step`.
pub fn optimizer_state_values(
    names: &[String],
    params: &[&Parameter],
) -> Vec<(String, Tensor)> {
    debug_assert_eq!(names.len(), params.len());
    let mut out = Vec::new();
    for (name, p) in names.iter().zip(params.iter()) {
        out.push((format!("{name}.adam_m"), p.adam_m.clone()));
        out.push((format!("{name}.adam_v"), p.adam_v.clone()));
        out.push((format!("{name}.step"), Tensor::scalar(p.step_count as f64)));
    }
    out
}

/// Restores optimizer state written by [`optimizer_state_values`].
pub fn load_optimizer_state(
    names: &[String],
    params: &mut [&mut Parameter],
    entries: &[(String, Tensor)],
) -> Result<(), CheckpointError> {
    for (name, p) in names.iter().zip(params.iter_mut()) {
        let m = find_shaped(entries, &format!("{name}.adam_m"), p.value.shape())?;
        let v = find_shaped(entries, &format!("{name}.adam_v"), p.value.shape())?;
        let s = find_shaped(entries, &format!("{name}.step"), &[1])?;
        p.adam_m = m.clone();
        p.adam_v = v.clone();
        p.step_count = s.data()[0] as u64;
    }
    Ok(())
}

impl StudentEncoder {
    /// Names of the trainable parameters, in `params_mut` order.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.naf.layers.len() {
            out.push(format!("naf/fc{}.weight", i + 1));
            out.push(format!("naf/fc{}.bias", i + 1));
        }
        out.push(String::from("student/sfi.bias"));
        for i in 0..self.deep.len() {
            out.push(format!("student/conv{}.weight", i + 2));
            out.push(format!("student/conv{}.bias", i + 2));
        }
        out
    }
}

/// Ensemble MOS: listener-wise scores per model, averaged over listeners and
/// models, denormalized, and clamped to [1, 5].
pub fn predict_mos(
    x: &Waveform,
    models: &[FoldModel],
    listener_ids: &[usize],
) -> Result<f64, ModelError> {
    let per_model = predict_mos_per_model(x, models, listener_ids)?;
    let mean = per_model.iter().sum::<f64>() / per_model.len() as f64;
    Ok(mean.clamp(1.0, 5.0))
}

/// Denormalized (unclamped) MOS of each model, averaged over listeners.
pub fn predict_mos_per_model(
    x: &Waveform,
    models: &[FoldModel],
    listener_ids: &[usize],
) -> Result<Vec<f64>, ModelError> {
    if models.is_empty() {
        return Err(ModelError::EmptyModelList);
    }
    if listener_ids.is_empty() {
        return Err(ModelError::EmptyListenerList);
    }
    let mut out = Vec::with_capacity(models.len());
    for model in models {
        let pooled = model.frontend.pooled(x)?;
        let mut acc = 0.0;
        for &lid in listener_ids {
            let (s, _) = model.head.score_vector(&pooled, lid)?;
            acc += denormalize_score(s);
        }
        out.push(acc / listener_ids.len() as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv1d_out_len;
    use crate::rng::seed_rng;
    use crate::signal::bandlimited_noise;

    fn small_config() -> EncoderConfig {
        EncoderConfig {
            dim: 8,
            base_kernel: 10,
            base_stride: 5.0,
            deep_kernel: 4,
            deep_strides: vec![4, 2],
        }
    }

    fn small_naf_cfg() -> NafConfig {
        NafConfig {
            rff_features: 8,
            rff_scale: 10.0,
            hidden: 16,
            max_freq_hz: 24_000.0,
        }
    }

    #[test]
    fn teacher_layer1_frame_arithmetic() {
        let cfg = small_config();
        let teacher = TeacherEncoder::new(&cfg, &mut seed_rng(1));
        let x = bandlimited_noise(1.0, 4000.0, 16_000, 2).unwrap();
        let stack = teacher.features(&x).unwrap();
        assert_eq!(stack.layers[0].shape()[1], conv1d_out_len(16_000, 10, 5.0));
        assert_eq!(stack.num_layers(), cfg.num_layers());
    }

    #[test]
    fn teacher_rejects_non_16k_input() {
        let teacher = TeacherEncoder::new(&small_config(), &mut seed_rng(1));
        let x = bandlimited_noise(0.5, 4000.0, 24_000, 2).unwrap();
        assert!(matches!(
            teacher.features(&x),
            Err(ModelError::WrongRate { expected: 16_000, got: 24_000 })
        ));
    }

    #[test]
    fn teacher_is_deterministic_and_finite_on_zero_input() {
        let teacher = TeacherEncoder::new(&small_config(), &mut seed_rng(5));
        let x = Waveform::new(vec![0.0; 8000], 16_000);
        let a = teacher.features(&x).unwrap();
        let b = teacher.features(&x).unwrap();
        assert_eq!(a, b);
        assert!(a.layers.iter().all(|l| l.all_finite()));
    }

    #[test]
    fn student_frame_counts_match_across_rates() {
        let cfg = small_config();
        let mut rng = seed_rng(3);
        let student = StudentEncoder::new(&cfg, &small_naf_cfg(), &mut rng);
        let mut frame_counts = Vec::new();
        for rate in [16_000u32, 24_000, 48_000, 8_000] {
            let x = bandlimited_noise(1.0, 3500.0, rate, 77).unwrap();
            let stack = student.features(&x).unwrap();
            frame_counts.push(stack.layers.iter().map(|l| l.shape()[1]).collect::<Vec<_>>());
        }
        for layer in 0..frame_counts[0].len() {
            for rates in frame_counts.windows(2) {
                let a = rates[0][layer] as i64;
                let b = rates[1][layer] as i64;
                assert!((a - b).abs() <= 1, "layer {layer}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn student_rejects_unsupported_rate() {
        let student = StudentEncoder::new(&small_config(), &small_naf_cfg(), &mut seed_rng(3));
        let x = bandlimited_noise(0.5, 3000.0, 44_100, 4).unwrap();
        assert!(matches!(
            student.features(&x),
            Err(ModelError::UnsupportedRate(44_100))
        ));
    }

    #[test]
    fn identical_listener_embeddings_give_identical_scores() {
        let mut rng = seed_rng(9);
        let mut head = MosHead::new(3, 8, &mut rng);
        let row: Vec<f64> = head.listener_table.value.row(0).to_vec();
        head.listener_table.value.row_mut(2).copy_from_slice(&row);
        let pooled = Tensor::randn(&[8], 1.0, &mut rng);
        let (a, _) = head.score_vector(&pooled, 0).unwrap();
        let (b, _) = head.score_vector(&pooled, 2).unwrap();
        assert_eq!(a, b);
        let (c, _) = head.score_vector(&pooled, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn predict_mos_denormalizes_and_averages() {
        let mut rng = seed_rng(11);
        let cfg = small_config();
        let naf_cfg = small_naf_cfg();
        // heads rigged to constant outputs via zero weights and fixed bias
        let mut m1 = FoldModel {
            frontend: Frontend::Sfi(StudentEncoder::new(&cfg, &naf_cfg, &mut rng)),
            head: MosHead::new(2, cfg.dim, &mut rng),
        };
        m1.head.fc2_weight.value.fill(0.0);
        m1.head.fc2_bias.value.fill(1.0); // normalized 1 -> MOS 5
        let mut m2 = m1.clone();
        m2.head.fc2_bias.value.fill(0.0); // normalized 0 -> MOS 2

        let x = bandlimited_noise(0.5, 3500.0, 16_000, 5).unwrap();
        let one = predict_mos(&x, core::slice::from_ref(&m1), &[0]).unwrap();
        assert!((one - 5.0).abs() < 1e-12);
        let both = predict_mos(&x, &[m1, m2], &[0, 1]).unwrap();
        assert!((both - 3.5).abs() < 1e-12);
    }

    #[test]
    fn predict_mos_rejects_empty_inputs() {
        let x = bandlimited_noise(0.5, 3000.0, 16_000, 5).unwrap();
        assert!(matches!(
            predict_mos(&x, &[], &[0]),
            Err(ModelError::EmptyModelList)
        ));
    }

    #[test]
    fn normalization_round_trip() {
        assert_eq!(normalize_score(2.0), 0.0);
        assert_eq!(normalize_score(5.0), 1.0);
        assert_eq!(normalize_score(1.0), -1.0 / 3.0);
        assert_eq!(denormalize_score(1.0), 5.0);
    }

    #[test]
    fn baseline_difference_is_the_rate_embedding() {
        let mut rng = seed_rng(21);
        let cfg = small_config();
        let encoder = TeacherEncoder::new(&cfg, &mut rng);
        let sf_emb = SfEmbedding::new(cfg.dim, &mut rng);
        // one underlying signal presented at 24 and 48 kHz; identical after
        // resampling to 16 kHz up to resampler error, so compare the rows
        let x24 = bandlimited_noise(0.5, 3000.0, 24_000, 9).unwrap();
        let x48 = bandlimited_noise(0.5, 3000.0, 48_000, 9).unwrap();
        let f24 = baseline_features(&x24, &encoder, &sf_emb).unwrap();
        let f48 = baseline_features(&x48, &encoder, &sf_emb).unwrap();
        let row24 = sf_emb.table.value.row(1);
        let row48 = sf_emb.table.value.row(2);
        for i in 0..cfg.dim {
            let diff = (f24.data()[i] - row24[i]) - (f48.data()[i] - row48[i]);
            assert!(diff.abs() < 0.05, "channel {i}: residual {diff}");
        }
    }

    #[test]
    fn baseline_rejects_8k_and_zero_embedding_reduces_to_encoder() {
        let mut rng = seed_rng(22);
        let cfg = small_config();
        let encoder = TeacherEncoder::new(&cfg, &mut rng);
        let mut sf_emb = SfEmbedding::new(cfg.dim, &mut rng);
        let x8 = bandlimited_noise(0.5, 3000.0, 8_000, 9).unwrap();
        assert!(matches!(
            baseline_features(&x8, &encoder, &sf_emb),
            Err(ModelError::UnsupportedRate(8_000))
        ));

        sf_emb.table.value.fill(0.0);
        let x16 = bandlimited_noise(0.5, 3000.0, 16_000, 9).unwrap();
        let feats = baseline_features(&x16, &encoder, &sf_emb).unwrap();
        let plain = mean_pool(encoder.features(&x16).unwrap().last());
        assert_eq!(feats, plain);
    }
}
