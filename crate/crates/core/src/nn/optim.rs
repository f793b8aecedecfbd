use serde::{Deserialize, Serialize};

use super::ParameterSet;

/// Per-component clamp to `[-threshold, threshold]`, i.e. projection onto
/// the L∞ ball.
pub fn clip_gradients(grads: &mut ParameterSet, threshold: f64) {
    for t in grads.tensors_mut() {
        for g in t.data_mut() {
            *g = g.clamp(-threshold, threshold);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.005, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: ParameterSet,
    pub v: ParameterSet,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        AdamState { config, m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &ParameterSet) {
        assert!(params.same_layout(grads) && params.same_layout(&self.m), "adam: parameter layout mismatch");
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            for (mk, gk) in m.iter_mut().zip(g) {
                *mk = beta1 * *mk + (1.0 - beta1) * gk;
            }
            let v = self.v[i].data_mut();
            for (vk, gk) in v.iter_mut().zip(g) {
                *vk = beta2 * *vk + (1.0 - beta2) * gk * gk;
            }
            let (m, v) = (self.m[i].data(), self.v[i].data());
            for ((p, mk), vk) in params[i].data_mut().iter_mut().zip(m).zip(v) {
                *p -= lr * (mk / c1) / ((vk / c2).sqrt() + eps);
            }
        }
    }
}
