//! Reward-aware KL coefficients.
//!
//! Each turn's KL penalty grows with the positive part of the gap between the
//! two positive-trajectory rewards. When correcting pays more than keeping
//! (`R(0->1) > R(1->1)`) the first turn is pinned to the reference, which
//! blocks deliberately wrong first answers; in the opposite regime the second
//! turn is pinned instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KlConfig {
    pub lambda: f64,
    pub beta_base: f64,
}

impl Default for KlConfig {
    fn default() -> Self {
        KlConfig {
            lambda: 0.01,
            beta_base: 0.001,
        }
    }
}

impl KlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config(
                "kl.lambda",
                "positive",
                format!("lambda must be > 0, got {}", self.lambda),
            ));
        }
        if !(self.beta_base.is_finite() && self.beta_base >= 0.0) {
            return Err(Error::config(
                "kl.beta_base",
                "non-negative",
                format!("beta_base must be >= 0, got {}", self.beta_base),
            ));
        }
        Ok(())
    }
}

/// Per-turn KL penalty coefficients for one query.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KlCoefficients {
    pub beta1: f64,
    pub beta2: f64,
}

pub fn kl_coefficients(r_01: f64, r_11: f64, cfg: &KlConfig) -> KlCoefficients {
    KlCoefficients {
        beta1: ((r_01 - r_11) * cfg.lambda).max(0.0) + cfg.beta_base,
        beta2: ((r_11 - r_01) * cfg.lambda).max(0.0) + cfg.beta_base,
    }
}
