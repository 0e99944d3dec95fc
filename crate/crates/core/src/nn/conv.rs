//! 1-D convolution with integer or fractional stride.
//!
//! Frame `t` of the output reads input positions `t*stride + k` for
//! `k = 0..K-1`. Non-integer positions are linearly interpolated between the
//! two neighboring samples, which makes a stride like 7.5 behave exactly as
//! an integer-stride convolution on the linearly upsampled-by-2 signal.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;
use super::NnError;
use crate::math;

/// Number of output frames for input length `t`, kernel length `k`, stride `s`.
pub fn conv1d_out_len(t: usize, k: usize, stride: f64) -> usize {
    debug_assert!(k <= t && stride > 0.0);
    (math::floor((t - k) as f64 / stride)) as usize + 1
}

fn check_shapes(input: &Tensor, kernel: &Tensor, stride: f64) -> Result<(), NnError> {
    if stride <= 0.0 || !stride.is_finite() {
        return Err(NnError::NonPositiveStride(stride));
    }
    if input.shape().len() != 2 || kernel.shape().len() != 3 {
        return Err(NnError::ShapeMismatch(format!(
            "conv1d expects input [C_in, T] and kernel [C_out, C_in, K], got {:?} and {:?}",
            input.shape(),
            kernel.shape()
        )));
    }
    if input.shape()[0] != kernel.shape()[1] {
        return Err(NnError::ShapeMismatch(format!(
            "input channels {} != kernel input channels {}",
            input.shape()[0],
            kernel.shape()[1]
        )));
    }
    let (t, k) = (input.shape()[1], kernel.shape()[2]);
    if k == 0 || k > t {
        return Err(NnError::KernelTooLong { kernel: k, input: t });
    }
    Ok(())
}

/// Base input index and interpolation fraction for output frame `t`.
/// The fraction is shared by every tap of the frame.
#[inline]
fn frame_base(t: usize, stride: f64) -> (usize, f64) {
    let pos = t as f64 * stride;
    let base = math::floor(pos);
    (base as usize, pos - base)
}

pub fn conv1d(input: &Tensor, kernel: &Tensor, stride: f64) -> Result<Tensor, NnError> {
    check_shapes(input, kernel, stride)?;
    let (c_in, t_in) = (input.shape()[0], input.shape()[1]);
    let (c_out, k) = (kernel.shape()[0], kernel.shape()[2]);
    let t_out = conv1d_out_len(t_in, k, stride);
    let mut out = vec![0.0; c_out * t_out];

    let x = input.data();
    let w = kernel.data();
    if stride == math::floor(stride) {
        let s = stride as usize;
        for co in 0..c_out {
            let orow = &mut out[co * t_out..(co + 1) * t_out];
            for ci in 0..c_in {
                let xrow = &x[ci * t_in..(ci + 1) * t_in];
                let wrow = &w[(co * c_in + ci) * k..(co * c_in + ci + 1) * k];
                for (t, o) in orow.iter_mut().enumerate() {
                    let base = t * s;
                    let mut acc = 0.0;
                    for (kk, &wv) in wrow.iter().enumerate() {
                        acc += xrow[base + kk] * wv;
                    }
                    *o += acc;
                }
            }
        }
    } else {
        for co in 0..c_out {
            let orow = &mut out[co * t_out..(co + 1) * t_out];
            for ci in 0..c_in {
                let xrow = &x[ci * t_in..(ci + 1) * t_in];
                let wrow = &w[(co * c_in + ci) * k..(co * c_in + ci + 1) * k];
                for (t, o) in orow.iter_mut().enumerate() {
                    let (base, a) = frame_base(t, stride);
                    let mut acc = 0.0;
                    if a == 0.0 {
                        for (kk, &wv) in wrow.iter().enumerate() {
                            acc += xrow[base + kk] * wv;
                        }
                    } else {
                        for (kk, &wv) in wrow.iter().enumerate() {
                            let x0 = xrow[base + kk];
                            let x1 = xrow[base + kk + 1];
                            acc += (x0 + a * (x1 - x0)) * wv;
                        }
                    }
                    *o += acc;
                }
            }
        }
    }
    Ok(Tensor::from_vec(&[c_out, t_out], out))
}

/// Exact gradients of [`conv1d`], including the interpolation weights'
/// contribution to the input gradient.
pub fn conv1d_backward(
    grad_out: &Tensor,
    input: &Tensor,
    kernel: &Tensor,
    stride: f64,
) -> Result<(Tensor, Tensor), NnError> {
    check_shapes(input, kernel, stride)?;
    let (c_in, t_in) = (input.shape()[0], input.shape()[1]);
    let (c_out, k) = (kernel.shape()[0], kernel.shape()[2]);
    let t_out = conv1d_out_len(t_in, k, stride);
    if grad_out.shape() != [c_out, t_out] {
        return Err(NnError::ShapeMismatch(format!(
            "grad_out shape {:?}, expected [{c_out}, {t_out}]",
            grad_out.shape()
        )));
    }

    let x = input.data();
    let w = kernel.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; c_in * t_in];
    let mut gw = vec![0.0; c_out * c_in * k];

    let integral = stride == math::floor(stride);
    for co in 0..c_out {
        let gorow = &go[co * t_out..(co + 1) * t_out];
        for ci in 0..c_in {
            let xrow = &x[ci * t_in..(ci + 1) * t_in];
            let gxrow = &mut gx[ci * t_in..(ci + 1) * t_in];
            let widx = (co * c_in + ci) * k;
            let wrow = &w[widx..widx + k];
            let gwrow = &mut gw[widx..widx + k];
            for (t, &g) in gorow.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                if integral {
                    let base = t * stride as usize;
                    for kk in 0..k {
                        gwrow[kk] += xrow[base + kk] * g;
                        gxrow[base + kk] += wrow[kk] * g;
                    }
                } else {
                    let (base, a) = frame_base(t, stride);
                    if a == 0.0 {
                        for kk in 0..k {
                            gwrow[kk] += xrow[base + kk] * g;
                            gxrow[base + kk] += wrow[kk] * g;
                        }
                    } else {
                        for kk in 0..k {
                            let x0 = xrow[base + kk];
                            let x1 = xrow[base + kk + 1];
                            gwrow[kk] += (x0 + a * (x1 - x0)) * g;
                            let wg = wrow[kk] * g;
                            gxrow[base + kk] += (1.0 - a) * wg;
                            gxrow[base + kk + 1] += a * wg;
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(&[c_in, t_in], gx),
        Tensor::from_vec(&[c_out, c_in, k], gw),
    ))
}

/// Linear upsample-by-2: `[x0, (x0+x1)/2, x1, ...]`, length `2T - 1`.
/// Test oracle companion for half-integer strides; kept here so both the
/// implementation and its oracle share one definition of the fine grid.
pub fn upsample2_linear(row: &[f64]) -> Vec<f64> {
    if row.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(row.len() * 2 - 1);
    for i in 0..row.len() - 1 {
        out.push(row[i]);
        out.push(0.5 * (row[i] + row[i + 1]));
    }
    out.push(row[row.len() - 1]);
    out
}
