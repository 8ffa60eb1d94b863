//! ADAM with bias-corrected moments.

use super::tensor::Parameter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One update from the accumulated gradient; the gradient is cleared after.
pub fn adam_step(p: &mut Parameter, cfg: &AdamConfig) {
    p.step += 1;
    let t = p.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let values = p.value.as_mut_slice();
    let grads = p.grad.as_mut_slice();
    let ms = p.adam_m.as_mut_slice();
    let vs = p.adam_v.as_mut_slice();
    for k in 0..values.len() {
        let g = grads[k];
        ms[k] = cfg.beta1 * ms[k] + (1.0 - cfg.beta1) * g;
        vs[k] = cfg.beta2 * vs[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = ms[k] / c1;
        let v_hat = vs[k] / c2;
        values[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        grads[k] = 0.0;
    }
}
