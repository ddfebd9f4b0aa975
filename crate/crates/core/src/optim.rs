//! Adam with lazy (sparse) moment updates.
//!
//! Only coordinates with a non-zero gradient are touched, each keeping its own
//! step count for bias correction. Rows of the policy table that were not
//! visited by a batch therefore stay exactly where they are, and a step with an
//! all-zero gradient is a no-op.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("trainer.adam.beta1", self.beta1), ("trainer.adam.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(key, "range", format!("decay rate must lie in [0, 1), got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(
                "trainer.adam.epsilon",
                "positive",
                format!("epsilon must be > 0, got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: Vec<u32>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: vec![0; len],
        }
    }

    /// Gradient-descent step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        let AdamConfig { beta1, beta2, epsilon } = self.cfg;
        for i in 0..params.len() {
            let g = grad[i];
            if g == 0.0 {
                continue;
            }
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / (1.0 - beta1.powi(t));
            let v_hat = self.v[i] / (1.0 - beta2.powi(t));
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}
