//! Adaptive reward model.
//!
//! The reward of a trajectory of type `i -> j` is a fixed base value plus a
//! dynamic term that is linear in the query's first-turn error rate `p0*`:
//!
//! ```text
//! R(i->1) = base(i->1) + k(i->1) * (p0* - theta)
//! R(i->0) = base(i->0) + k(i->0) * p0*
//! ```
//!
//! With `k(0->1) >= 0` and `k(1->1) <= 0`, correcting an error pays more than
//! keeping a correct answer exactly when `p0* > theta`, and the ordering flips
//! below the threshold.

use serde::{Deserialize, Serialize};

use crate::domain::{TrajectoryType, TypeTable};
use crate::error::{Error, Result};

/// Which sign pattern the scaling factors must follow.
///
/// `MainText` requires `k(0->1) >= 0, k(1->1) <= 0`; `AppendixTable` flips the
/// positive-branch signs (`k(0->1) <= 0, k(1->1) >= 0`). The negative branch is
/// `k(1->0) >= 0, k(0->0) <= 0` under both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    #[default]
    MainText,
    AppendixTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub base: TypeTable<f64>,
    pub k: TypeTable<f64>,
    pub theta: f64,
    #[serde(default)]
    pub sign_convention: SignConvention,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            base: TypeTable::new(1.0, -1.0, 1.0, -1.0),
            k: TypeTable::new(-1.0, 0.5, 1.0, -0.5),
            theta: 0.6,
            sign_convention: SignConvention::MainText,
        }
    }
}

impl RewardConfig {
    /// Table magnitudes with the table's own positive-branch signs.
    pub fn appendix_table() -> Self {
        RewardConfig {
            k: TypeTable::new(1.0, 0.5, -1.0, -0.5),
            sign_convention: SignConvention::AppendixTable,
            ..RewardConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_config(self)
    }
}

/// First-turn error rate of a query, estimated from `n` sampled first answers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proficiency {
    pub p0_star: f64,
    pub n: usize,
}

pub fn estimate_proficiency(first_turn_correct: &[bool]) -> Result<Proficiency> {
    let n = first_turn_correct.len();
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    let wrong = first_turn_correct.iter().filter(|&&c| !c).count();
    Ok(Proficiency {
        p0_star: wrong as f64 / n as f64,
        n,
    })
}

pub fn dynamic_reward(ttype: TrajectoryType, p0_star: f64, cfg: &RewardConfig) -> f64 {
    let k = cfg.k.get(ttype);
    if ttype.second_correct() {
        k * (p0_star - cfg.theta)
    } else {
        k * p0_star
    }
}

pub fn total_reward(ttype: TrajectoryType, p0_star: f64, cfg: &RewardConfig) -> f64 {
    cfg.base.get(ttype) + dynamic_reward(ttype, p0_star, cfg)
}

/// All four rewards at a given proficiency.
pub fn reward_table(p0_star: f64, cfg: &RewardConfig) -> TypeTable<f64> {
    TypeTable::new(
        total_reward(TrajectoryType::OneOne, p0_star, cfg),
        total_reward(TrajectoryType::OneZero, p0_star, cfg),
        total_reward(TrajectoryType::ZeroOne, p0_star, cfg),
        total_reward(TrajectoryType::ZeroZero, p0_star, cfg),
    )
}

/// Checks every invariant of [`RewardConfig`], reporting the first violation.
///
/// Constraint names: `finite`, `theta-range`, `base-equality`, `sign`,
/// `positive-reward`, `negative-reward`.
pub fn validate_config(cfg: &RewardConfig) -> Result<()> {
    let all_finite = cfg.theta.is_finite()
        && TrajectoryType::ALL
            .iter()
            .all(|&t| cfg.base.get(t).is_finite() && cfg.k.get(t).is_finite());
    if !all_finite {
        return Err(Error::config(
            "reward",
            "finite",
            "all rewards, scaling factors and theta must be finite",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::config(
            "reward.theta",
            "theta-range",
            format!("theta must lie in [0, 1], got {}", cfg.theta),
        ));
    }
    if cfg.base.one_one != cfg.base.zero_one || cfg.base.one_zero != cfg.base.zero_zero {
        return Err(Error::config(
            "reward.base",
            "base-equality",
            "base rewards must satisfy base(1->1) == base(0->1) and base(1->0) == base(0->0)",
        ));
    }

    use TrajectoryType::*;
    // (type, must be non-negative)
    let signs = match cfg.sign_convention {
        SignConvention::MainText => [(ZeroOne, true), (OneOne, false), (OneZero, true), (ZeroZero, false)],
        SignConvention::AppendixTable => {
            [(ZeroOne, false), (OneOne, true), (OneZero, true), (ZeroZero, false)]
        }
    };
    for (t, non_negative) in signs {
        let k = cfg.k.get(t);
        let ok = if non_negative { k >= 0.0 } else { k <= 0.0 };
        if !ok {
            let rel = if non_negative { ">= 0" } else { "<= 0" };
            return Err(Error::config(
                "reward.k",
                "sign",
                format!("k({t}) must be {rel}, got {k}"),
            ));
        }
    }

    // Rewards are linear in p0*, so checking both endpoints covers [0, 1].
    for p in [0.0, 1.0] {
        for t in [OneOne, ZeroOne] {
            let r = total_reward(t, p, cfg);
            if r <= 0.0 {
                return Err(Error::config(
                    "reward",
                    "positive-reward",
                    format!("R({t}) must be > 0 for all p0*, got {r} at p0* = {p}"),
                ));
            }
        }
        for t in [OneZero, ZeroZero] {
            let r = total_reward(t, p, cfg);
            if r >= 0.0 {
                return Err(Error::config(
                    "reward",
                    "negative-reward",
                    format!("R({t}) must be < 0 for all p0*, got {r} at p0* = {p}"),
                ));
            }
        }
    }
    Ok(())
}
