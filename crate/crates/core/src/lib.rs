//! Tabular laboratory for two-turn self-evaluation reinforcement learning.
//!
//! A policy answers a query (turn 1), then re-answers after a fixed
//! self-evaluation prompt (turn 2). Trajectories are scored by their
//! correctness transition `i -> j`, and the policy is trained with GRPO under
//! one of three reward schemes:
//!
//! - `adapo`: the adaptive reward model ([`arm`]) with reward-aware dynamic
//!   KL coefficients ([`dynkl`]), both driven by the per-query first-turn
//!   error rate measured on the rollout group itself.
//! - `grpo_fixed`: a static per-type reward table.
//! - `score`: a two-stage schedule with correctness shaping.
//!
//! Policies are softmax tables, so every distribution, KL divergence and
//! gradient is exact, and small instances can be checked by enumeration.

pub mod arm;
pub mod cli;
pub mod domain;
pub mod dynkl;
pub mod env;
pub mod error;
pub mod filter;
pub mod grpo;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
