//! Affine layers, SiLU, embedding lookup, and MSE, with exact reverse-mode
//! gradients.

use alloc::format;
use alloc::vec;

use super::tensor::Tensor;
use super::NnError;
use crate::math;

/// `out = weight * input + bias` with `input [N]`, `weight [M, N]`, `bias [M]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let n = input.len();
    if weight.shape().len() != 2 || weight.shape()[1] != n || bias.len() != weight.shape()[0] {
        return Err(NnError::ShapeMismatch(format!(
            "linear: input [{n}], weight {:?}, bias {:?}",
            weight.shape(),
            bias.shape()
        )));
    }
    let m = weight.shape()[0];
    let x = input.data();
    let mut out = bias.data().to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        let wrow = weight.row(i);
        let mut acc = 0.0;
        for (a, b) in wrow.iter().zip(x.iter()) {
            acc += a * b;
        }
        *o += acc;
    }
    Ok(Tensor::from_vec(&[m], out))
}

/// Gradients of [`linear`]: returns `(grad_input, grad_weight, grad_bias)`.
pub fn linear_backward(
    grad_out: &Tensor,
    input: &Tensor,
    weight: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let (m, n) = (weight.shape()[0], weight.shape()[1]);
    if grad_out.len() != m || input.len() != n {
        return Err(NnError::ShapeMismatch(format!(
            "linear_backward: grad_out [{}], input [{}], weight {:?}",
            grad_out.len(),
            input.len(),
            weight.shape()
        )));
    }
    let g = grad_out.data();
    let x = input.data();
    let mut gx = vec![0.0; n];
    let mut gw = vec![0.0; m * n];
    for i in 0..m {
        let gi = g[i];
        if gi == 0.0 {
            continue;
        }
        let wrow = weight.row(i);
        let gwrow = &mut gw[i * n..(i + 1) * n];
        for j in 0..n {
            gx[j] += gi * wrow[j];
            gwrow[j] = gi * x[j];
        }
    }
    Ok((
        Tensor::from_vec(&[n], gx),
        Tensor::from_vec(&[m, n], gw),
        Tensor::from_vec(&[m], g.to_vec()),
    ))
}

/// Elementwise `x * sigmoid(x)`.
pub fn silu(input: &Tensor) -> Tensor {
    let data = input.iter().map(|&x| x * math::sigmoid(x)).collect();
    Tensor::from_vec(input.shape(), data)
}

/// `d silu/dx = sigmoid(x) * (1 + x * (1 - sigmoid(x)))`.
pub fn silu_backward(grad_out: &Tensor, input: &Tensor) -> Tensor {
    debug_assert_eq!(grad_out.shape(), input.shape());
    let data = grad_out
        .iter()
        .zip(input.iter())
        .map(|(&g, &x)| {
            let s = math::sigmoid(x);
            g * s * (1.0 + x * (1.0 - s))
        })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Row lookup in `table [V, D]`.
pub fn embedding(table: &Tensor, id: usize) -> Result<Tensor, NnError> {
    let rows = table.shape()[0];
    if id >= rows {
        return Err(NnError::IdOutOfRange { id, len: rows });
    }
    Ok(Tensor::from_vec(&[table.shape()[1]], table.row(id).to_vec()))
}

/// Accumulates `grad_out` into row `id` of `grad_table`.
pub fn embedding_backward(grad_table: &mut Tensor, id: usize, grad_out: &Tensor) {
    let row = grad_table.row_mut(id);
    for (a, b) in row.iter_mut().zip(grad_out.iter()) {
        *a += b;
    }
}

/// Mean squared error over all elements.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch(format!(
            "mse_loss: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len().max(1) as f64;
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        acc += d * d;
    }
    Ok(acc / n)
}

/// Gradient of [`mse_loss`] with respect to `pred`.
pub fn mse_loss_backward(pred: &Tensor, target: &Tensor) -> Tensor {
    debug_assert_eq!(pred.shape(), target.shape());
    let n = pred.len().max(1) as f64;
    let data = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Tensor::from_vec(pred.shape(), data)
}
