//! GRPO core: group-normalised advantages, the clipped surrogate, and the
//! per-turn KL penalties against a frozen reference policy.
//!
//! For one query with `n` trajectories sampled from the old policy the loss is
//!
//! ```text
//! L = -(1/n) sum_i sum_{t in {1,2}} min(r_it A_i, clip(r_it, 1-eps, 1+eps) A_i)
//!     + beta1 * KL(pi(.|q) || ref(.|q))
//!     + beta2 * (1/n) sum_i KL(pi(.|q,y1_i) || ref(.|q,y1_i))
//! ```
//!
//! where `r_it` is the new/old probability ratio of turn `t` and `A_i` the
//! trajectory advantage, shared by both turns.

use serde::{Deserialize, Serialize};

use crate::domain::Trajectory;
use crate::dynkl::KlCoefficients;
use crate::error::{Error, Result};
use crate::policy::{log_softmax, PolicyGradient, TabularPolicy};

/// Rewards of one rollout group and their normalised advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageGroup {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Set when every reward is identical; advantages are then all zero and
    /// the group must not be optimised.
    pub zero_variance: bool,
}

pub fn group_advantages(rewards: &[f64]) -> Result<AdvantageGroup> {
    let n = rewards.len();
    if n < 2 {
        return Err(Error::GroupTooSmall(n));
    }
    let zero_variance = rewards.iter().all(|&r| r == rewards[0]);
    let mean = rewards.iter().sum::<f64>() / n as f64;
    if zero_variance {
        return Ok(AdvantageGroup {
            rewards: rewards.to_vec(),
            advantages: vec![0.0; n],
            mean: rewards[0],
            std: 0.0,
            zero_variance,
        });
    }
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    Ok(AdvantageGroup {
        rewards: rewards.to_vec(),
        advantages: rewards.iter().map(|r| (r - mean) / std).collect(),
        mean,
        std,
        zero_variance,
    })
}

pub fn clipped_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// True when the clipped branch strictly wins the `min`, i.e. the term has
/// zero gradient with respect to the ratio.
fn clip_active(ratio: f64, advantage: f64, epsilon: f64) -> bool {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    clipped * advantage < ratio * advantage
}

/// `KL(p || q)` in nats for strictly positive distributions.
pub fn exact_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| a * (a / b).ln()).sum())
}

/// KL between the softmax distributions of two logit rows, computed in log space.
pub fn kl_from_logits(p_logits: &[f64], q_logits: &[f64]) -> Result<f64> {
    if p_logits.len() != q_logits.len() {
        return Err(Error::SupportMismatch {
            left: p_logits.len(),
            right: q_logits.len(),
        });
    }
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    Ok(lp.iter().zip(&lq).map(|(&a, &b)| a.exp() * (a - b)).sum())
}

/// Adds `scale * d KL(softmax(p) || softmax(q)) / d p` into `out`.
fn accumulate_kl_grad(p_logits: &[f64], q_logits: &[f64], scale: f64, out: &mut [f64]) -> f64 {
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    let kl: f64 = lp.iter().zip(&lq).map(|(&a, &b)| a.exp() * (a - b)).sum();
    for (o, (&a, &b)) in out.iter_mut().zip(lp.iter().zip(&lq)) {
        *o += scale * a.exp() * (a - b - kl);
    }
    kl
}

/// Low-variance ("k3") KL estimator from samples `a ~ pi` with
/// `log_ratios[i] = ln(ref(a_i) / pi(a_i))`.
pub fn k3_kl_estimate(log_ratios: &[f64]) -> f64 {
    if log_ratios.is_empty() {
        return 0.0;
    }
    log_ratios.iter().map(|&lr| lr.exp() - lr - 1.0).sum::<f64>() / log_ratios.len() as f64
}

/// Trajectories of one query sampled from the old policy (their recorded
/// log-probabilities are the old-policy values) with their advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroup {
    pub query_id: usize,
    pub trajectories: Vec<Trajectory>,
    pub advantages: AdvantageGroup,
}

/// Probability ratios and the clipped policy objective of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTerms {
    /// `[turn1, turn2]` ratio per trajectory.
    pub ratios: Vec<[f64; 2]>,
    pub clip_epsilon: f64,
    /// `(1/n) sum_i sum_t clipped_term(r_it, A_i, eps)`.
    pub clipped_objective: f64,
}

pub fn surrogate_terms(policy: &TabularPolicy, group: &ScoredGroup, epsilon: f64) -> Result<SurrogateTerms> {
    let n = group.trajectories.len() as f64;
    let mut ratios = Vec::with_capacity(group.trajectories.len());
    let mut objective = 0.0;
    for (t, &adv) in group.trajectories.iter().zip(&group.advantages.advantages) {
        let (lp1, lp2) = policy.trajectory_log_probs(t)?;
        let r = [(lp1 - t.turn1.log_prob).exp(), (lp2 - t.turn2.log_prob).exp()];
        objective += clipped_term(r[0], adv, epsilon) + clipped_term(r[1], adv, epsilon);
        ratios.push(r);
    }
    Ok(SurrogateTerms {
        ratios,
        clip_epsilon: epsilon,
        clipped_objective: objective / n,
    })
}

/// Exact per-turn KL terms of one group: turn 1 for the query row, turn 2
/// averaged over the sampled first answers.
pub fn group_kls(policy: &TabularPolicy, reference: &TabularPolicy, group: &ScoredGroup) -> Result<(f64, f64)> {
    let q = group.query_id;
    let kl1 = kl_from_logits(policy.turn1_row(q)?, reference.turn1_row(q)?)?;
    let mut kl2 = 0.0;
    for t in &group.trajectories {
        let y1 = t.turn1.answer;
        kl2 += kl_from_logits(policy.turn2_row(q, y1)?, reference.turn2_row(q, y1)?)?;
    }
    Ok((kl1, kl2 / group.trajectories.len() as f64))
}

pub fn surrogate_loss(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    group: &ScoredGroup,
    betas: KlCoefficients,
    epsilon: f64,
) -> Result<f64> {
    if group.advantages.zero_variance {
        return Err(Error::ZeroVarianceGroup);
    }
    let terms = surrogate_terms(policy, group, epsilon)?;
    let (kl1, kl2) = group_kls(policy, reference, group)?;
    Ok(-terms.clipped_objective + betas.beta1 * kl1 + betas.beta2 * kl2)
}

/// Loss of one group and `weight * dL/dlogits` accumulated into `grad`.
pub fn surrogate_loss_and_grad(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    group: &ScoredGroup,
    betas: KlCoefficients,
    epsilon: f64,
    weight: f64,
    grad: &mut PolicyGradient,
) -> Result<f64> {
    if group.advantages.zero_variance {
        return Err(Error::ZeroVarianceGroup);
    }
    let n = group.trajectories.len() as f64;
    let terms = surrogate_terms(policy, group, epsilon)?;

    // d/dz [ r * A ] = A * r * d log pi / dz on the unclipped branch.
    for ((t, &adv), r) in group
        .trajectories
        .iter()
        .zip(&group.advantages.advantages)
        .zip(&terms.ratios)
    {
        let w1 = if clip_active(r[0], adv, epsilon) { 0.0 } else { -weight * adv * r[0] / n };
        let w2 = if clip_active(r[1], adv, epsilon) { 0.0 } else { -weight * adv * r[1] / n };
        policy.accumulate_grad_log_prob(t, w1, w2, grad)?;
    }

    let q = group.query_id;
    let out = grad.values_mut();
    let o1 = policy.row1_offset(q);
    let v = policy.answers();
    let kl1 = accumulate_kl_grad(
        policy.turn1_row(q)?,
        reference.turn1_row(q)?,
        weight * betas.beta1,
        &mut out[o1..o1 + v],
    );
    let mut kl2 = 0.0;
    for t in &group.trajectories {
        let y1 = t.turn1.answer;
        let o2 = policy.row2_offset(q, y1.0);
        kl2 += accumulate_kl_grad(
            policy.turn2_row(q, y1)?,
            reference.turn2_row(q, y1)?,
            weight * betas.beta2 / n,
            &mut out[o2..o2 + v],
        );
    }
    Ok(-terms.clipped_objective + betas.beta1 * kl1 + betas.beta2 * kl2 / n)
}
