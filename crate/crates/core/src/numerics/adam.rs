use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Added to the gradient as `l2_lambda * param` before the moment update.
    pub l2_lambda: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2_lambda: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }

    /// `lr = 0` is accepted and freezes every parameter.
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.l2_lambda >= 0.0
            && self.l2_lambda.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("adam config {:?}", self)))
        }
    }
}

/// One bias-corrected Adam update over every trainable entry, then clears gradients.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    cfg.validate()?;
    if !store.has_gradients() {
        return Err(Error::GradientsMissing);
    }
    let t = store.bump_step() as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for e in store.entries_mut() {
        if !e.trainable {
            continue;
        }
        let value = e.value.data_mut();
        let grad = e.grad.data_mut();
        let m = e.m.data_mut();
        let v = e.v.data_mut();
        for i in 0..value.len() {
            let g = grad[i] + cfg.l2_lambda * value[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            grad[i] = 0.0;
        }
    }
    Ok(())
}
