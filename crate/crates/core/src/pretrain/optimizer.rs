//! Adam with linear warmup and linear decay, plus global-norm clipping.

use serde::{Deserialize, Serialize};

use crate::encoder::params::{Block, ModelParams};
use crate::encoder::ModelConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient norm limit; non-positive disables clipping.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 1.0,
        }
    }
}

/// Learning rate for 0-based `step`: ramps to `peak` over `warmup` steps, then
/// falls linearly to zero at `total`.
pub fn learning_rate(step: usize, peak: f64, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return peak * (step + 1) as f64 / warmup as f64;
    }
    let span = total.saturating_sub(warmup).max(1);
    peak * total.saturating_sub(step) as f64 / span as f64
}

/// Factor that brings a gradient of norm `norm` within `clip`.
pub fn clip_factor(norm: f64, clip: f64) -> f64 {
    if clip > 0.0 && norm > clip {
        clip / norm
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct AdamSlot<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> AdamSlot<T> {
    pub fn new(len: usize) -> Self {
        AdamSlot {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    /// One bias-corrected update; `t` is the 1-based step count.
    pub fn update(&mut self, param: &mut [T], grad: &[T], lr: f64, t: u64, cfg: &AdamConfig) {
        let b1 = T::lit(cfg.beta1);
        let b2 = T::lit(cfg.beta2);
        let c1 = T::lit(1.0 - cfg.beta1.powi(t as i32));
        let c2 = T::lit(1.0 - cfg.beta2.powi(t as i32));
        let lr = T::lit(lr);
        let eps = T::lit(cfg.eps);
        let one = T::one();
        for (((p, &g), m), v) in param
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Adam state for every encoder tensor.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    slots: Vec<AdamSlot<T>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &ModelConfig, config: AdamConfig) -> Self {
        let slots = ModelParams::<T>::zeros(model)
            .tensors()
            .iter()
            .map(|t| AdamSlot::new(t.data.len()))
            .collect();
        Adam {
            config,
            slots,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates tensors whose block passes `trainable`; others are not touched.
    pub fn step(
        &mut self,
        params: &mut ModelParams<T>,
        grads: &ModelParams<T>,
        lr: f64,
        trainable: impl Fn(Block) -> bool,
    ) {
        self.t += 1;
        for ((p, g), slot) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.slots.iter_mut())
        {
            if trainable(p.block) {
                slot.update(p.data, g.data, lr, self.t, &self.config);
            }
        }
    }
}
