//! Core numerics for sampling-frequency-independent (SFI) speech feature
//! extraction and MOS prediction.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the filesystem: waveform processing, a small differentiable compute
//! kernel, the SFI convolutional layer with its neural analog filter, the
//! encoder/head models, knowledge-distillation and MOS training loops,
//! evaluation metrics, and the synthetic dataset generator. File and
//! command-line plumbing lives in the companion `sfimos` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod checkpoint;
pub mod data;
pub mod math;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod sfi;
pub mod signal;
pub mod training;

pub use nn::tensor::{Parameter, Tensor};
pub use signal::Waveform;
