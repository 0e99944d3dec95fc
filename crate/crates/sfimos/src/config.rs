//! Run configuration: a plain-text `key=value` file with CLI overrides.
//! Unknown keys are rejected; every run directory stores the resolved config.

use std::fmt::Write as _;
use std::path::Path;

use sfimos_core::models::EncoderConfig;
use sfimos_core::sfi::NafConfig;
use sfimos_core::training::TrainConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontendKind {
    Sfi,
    Baseline,
}

/// Every knob of the pipeline. Defaults are the desk-scale configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
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
    pub dim: usize,
    pub base_kernel: usize,
    pub base_stride: f64,
    pub deep_kernel: usize,
    pub deep_strides: Vec<usize>,
    pub rff_features: usize,
    pub rff_scale: f64,
    pub naf_hidden: usize,
    pub max_freq_hz: f64,
    pub crop_seconds: f64,
    pub freeze_encoder: bool,
    pub num_listeners: usize,
    pub frontend: FrontendKind,
    pub pretrain_manifest: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
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
            dim: 64,
            base_kernel: 10,
            base_stride: 5.0,
            deep_kernel: 4,
            deep_strides: vec![4, 4, 2],
            rff_features: 64,
            rff_scale: 10.0,
            naf_hidden: 256,
            max_freq_hz: 24_000.0,
            crop_seconds: 1.0,
            freeze_encoder: true,
            num_listeners: 10,
            frontend: FrontendKind::Sfi,
            pretrain_manifest: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| ConfigError::Read {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line,
                text: raw.to_string(),
            })?;
            self.set(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(
            key: &str,
            value: &str,
            line: usize,
        ) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                line,
                key: key.to_string(),
                message: e.to_string(),
            })
        }
        match key {
            "seed" => self.seed = parse(key, value, line)?,
            "lr" => self.lr = parse(key, value, line)?,
            "beta1" => self.beta1 = parse(key, value, line)?,
            "beta2" => self.beta2 = parse(key, value, line)?,
            "eps" => self.eps = parse(key, value, line)?,
            "batch_kd" => self.batch_kd = parse(key, value, line)?,
            "batch_pretrain" => self.batch_pretrain = parse(key, value, line)?,
            "batch_final" => self.batch_final = parse(key, value, line)?,
            "kd_epochs" => self.kd_epochs = parse(key, value, line)?,
            "mos_epochs" => self.mos_epochs = parse(key, value, line)?,
            "folds" => self.folds = parse(key, value, line)?,
            "dim" => self.dim = parse(key, value, line)?,
            "base_kernel" => self.base_kernel = parse(key, value, line)?,
            "base_stride" => self.base_stride = parse(key, value, line)?,
            "deep_kernel" => self.deep_kernel = parse(key, value, line)?,
            "deep_strides" => {
                let mut strides = Vec::new();
                for part in value.split(',') {
                    strides.push(parse::<usize>(key, part.trim(), line)?);
                }
                if strides.is_empty() {
                    return Err(ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        message: "need at least one stride".to_string(),
                    });
                }
                self.deep_strides = strides;
            }
            "rff_features" => self.rff_features = parse(key, value, line)?,
            "rff_scale" => self.rff_scale = parse(key, value, line)?,
            "naf_hidden" => self.naf_hidden = parse(key, value, line)?,
            "max_freq_hz" => self.max_freq_hz = parse(key, value, line)?,
            "crop_seconds" => self.crop_seconds = parse(key, value, line)?,
            "freeze_encoder" => self.freeze_encoder = parse(key, value, line)?,
            "num_listeners" => self.num_listeners = parse(key, value, line)?,
            "frontend" => {
                self.frontend = match value {
                    "sfi" => FrontendKind::Sfi,
                    "baseline" => FrontendKind::Baseline,
                    other => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            message: format!("expected sfi or baseline, got {other:?}"),
                        })
                    }
                }
            }
            "pretrain_manifest" => {
                self.pretrain_manifest = if value.is_empty() {
                    None
                } else {
                    Some(value.to_string())
                };
            }
            other => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Canonical text form; `apply_text(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "lr={}", self.lr);
        let _ = writeln!(s, "beta1={}", self.beta1);
        let _ = writeln!(s, "beta2={}", self.beta2);
        let _ = writeln!(s, "eps={}", self.eps);
        let _ = writeln!(s, "batch_kd={}", self.batch_kd);
        let _ = writeln!(s, "batch_pretrain={}", self.batch_pretrain);
        let _ = writeln!(s, "batch_final={}", self.batch_final);
        let _ = writeln!(s, "kd_epochs={}", self.kd_epochs);
        let _ = writeln!(s, "mos_epochs={}", self.mos_epochs);
        let _ = writeln!(s, "folds={}", self.folds);
        let _ = writeln!(s, "dim={}", self.dim);
        let _ = writeln!(s, "base_kernel={}", self.base_kernel);
        let _ = writeln!(s, "base_stride={}", self.base_stride);
        let _ = writeln!(s, "deep_kernel={}", self.deep_kernel);
        let strides: Vec<String> = self.deep_strides.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(s, "deep_strides={}", strides.join(","));
        let _ = writeln!(s, "rff_features={}", self.rff_features);
        let _ = writeln!(s, "rff_scale={}", self.rff_scale);
        let _ = writeln!(s, "naf_hidden={}", self.naf_hidden);
        let _ = writeln!(s, "max_freq_hz={}", self.max_freq_hz);
        let _ = writeln!(s, "crop_seconds={}", self.crop_seconds);
        let _ = writeln!(s, "freeze_encoder={}", self.freeze_encoder);
        let _ = writeln!(s, "num_listeners={}", self.num_listeners);
        let _ = writeln!(
            s,
            "frontend={}",
            match self.frontend {
                FrontendKind::Sfi => "sfi",
                FrontendKind::Baseline => "baseline",
            }
        );
        let _ = writeln!(
            s,
            "pretrain_manifest={}",
            self.pretrain_manifest.as_deref().unwrap_or("")
        );
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.dim == 0 || self.rff_features == 0 || self.naf_hidden == 0 {
            return Err(ConfigError::Invalid("model dimensions must be positive".into()));
        }
        if self.base_kernel == 0 || !(self.base_stride > 0.0) {
            return Err(ConfigError::Invalid("layer-1 geometry must be positive".into()));
        }
        if self.num_listeners == 0 {
            return Err(ConfigError::Invalid("need at least one listener".into()));
        }
        if !(self.max_freq_hz > 0.0) {
            return Err(ConfigError::Invalid("max_freq_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            batch_kd: self.batch_kd,
            batch_pretrain: self.batch_pretrain,
            batch_final: self.batch_final,
            kd_epochs: self.kd_epochs,
            mos_epochs: self.mos_epochs,
            folds: self.folds,
            crop_seconds: self.crop_seconds,
            freeze_encoder: self.freeze_encoder,
            seed: self.seed,
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            dim: self.dim,
            base_kernel: self.base_kernel,
            base_stride: self.base_stride,
            deep_kernel: self.deep_kernel,
            deep_strides: self.deep_strides.clone(),
        }
    }

    pub fn naf_config(&self) -> NafConfig {
        NafConfig {
            rff_features: self.rff_features,
            rff_scale: self.rff_scale,
            hidden: self.naf_hidden,
            max_freq_hz: self.max_freq_hz,
        }
    }
}
