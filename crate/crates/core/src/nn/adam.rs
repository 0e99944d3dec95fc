//! Adam optimizer with bias correction.

use super::tensor::Parameter;
use crate::math;

/// One Adam update over the given parameters. Gradients are consumed and
/// cleared afterwards.
pub fn adam_step<'a, I>(params: I, lr: f64, beta1: f64, beta2: f64, eps: f64)
where
    I: IntoIterator<Item = &'a mut Parameter>,
{
    for p in params {
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - math::powf(beta1, t as f64);
        let bc2 = 1.0 - math::powf(beta2, t as f64);
        let value = p.value.data_mut();
        let grad = p.grad.data_mut();
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for i in 0..value.len() {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            grad[i] = 0.0;
        }
    }
}
