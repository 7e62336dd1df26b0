//! Adam with global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
            batch_size: 64,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr > 0.0) {
            return Err(format!("lr {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err("Adam betas must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) || !(self.clip_norm > 0.0) {
            return Err("eps and clip_norm must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        Ok(())
    }
}

/// L2 norm of the accumulated gradients of `ids`.
pub fn grad_norm(store: &ParamStore, ids: &[ParamId]) -> f64 {
    ids.iter()
        .flat_map(|&id| store.get(id).grad.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Applies one bias-corrected Adam update to `ids` using their accumulated
/// gradients (clipped to `clip_norm` jointly), then clears those gradients.
pub fn adam_step(store: &mut ParamStore, ids: &[ParamId], cfg: &OptimizerConfig) {
    let norm = grad_norm(store, ids);
    let clip = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
    for &id in ids {
        let p = store.get_mut(id);
        p.adam.step += 1;
        let t = p.adam.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let values = p.value.data_mut();
        for i in 0..values.len() {
            let g = p.grad[i] * clip;
            let m = cfg.beta1 * p.adam.m[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * p.adam.v[i] + (1.0 - cfg.beta2) * g * g;
            p.adam.m[i] = m;
            p.adam.v[i] = v;
            values[i] -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
            p.grad[i] = 0.0;
        }
    }
}
