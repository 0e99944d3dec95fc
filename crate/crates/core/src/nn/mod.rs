//! Minimal differentiable compute kernel: tensors, 1-D convolution with
//! integer or fractional stride, affine layers, SiLU, embedding lookup,
//! losses, hand-written reverse-mode gradients, and Adam.

pub mod adam;
pub mod conv;
pub mod ops;
pub mod tensor;

pub use adam::adam_step;
pub use conv::{conv1d, conv1d_backward, conv1d_out_len, upsample2_linear};
pub use ops::{
    embedding, embedding_backward, linear, linear_backward, mse_loss, mse_loss_backward, silu,
    silu_backward,
};
pub use tensor::{Parameter, Tensor};

use alloc::string::String;
use thiserror::Error;

/// Errors from kernel operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("kernel length {kernel} exceeds input length {input}")]
    KernelTooLong { kernel: usize, input: usize },
    #[error("stride must be positive, got {0}")]
    NonPositiveStride(f64),
    #[error("embedding id {id} out of range for table of {len} rows")]
    IdOutOfRange { id: usize, len: usize },
}
