//! Two-turn tabular softmax policy.
//!
//! Turn 1 has one logit row per query; turn 2 has one row per
//! `(query, first answer)` pair. Conditioning turn 2 on the literal first
//! answer (rather than on its correctness) lets the policy learn to answer
//! wrong on purpose and fix the answer afterwards.
//!
//! All parameters live in one flat vector: the `Q x V` turn-1 table followed
//! by the `Q x V x V` turn-2 table.

use std::ops::Deref;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AnswerId, Query, Trajectory, TurnResponse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    queries: usize,
    answers: usize,
    params: Vec<f64>,
}

/// Gradient with the same layout as [`TabularPolicy`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    queries: usize,
    answers: usize,
    values: Vec<f64>,
}

/// Deep, read-only copy of a policy (reference and old-policy snapshots).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot(TabularPolicy);

impl Deref for PolicySnapshot {
    type Target = TabularPolicy;

    fn deref(&self) -> &TabularPolicy {
        &self.0
    }
}

fn param_len(queries: usize, answers: usize) -> usize {
    queries * answers + queries * answers * answers
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - log_z).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TabularPolicy {
    /// Uniform policy (all logits zero).
    pub fn zeros(queries: usize, answers: usize) -> Self {
        TabularPolicy {
            queries,
            answers,
            params: vec![0.0; param_len(queries, answers)],
        }
    }

    pub fn from_logits(queries: usize, answers: usize, logits1: &[f64], logits2: &[f64]) -> Result<Self> {
        if logits1.len() != queries * answers || logits2.len() != queries * answers * answers {
            return Err(Error::Shape(format!(
                "expected {} turn-1 and {} turn-2 logits, got {} and {}",
                queries * answers,
                queries * answers * answers,
                logits1.len(),
                logits2.len()
            )));
        }
        let params: Vec<f64> = logits1.iter().chain(logits2).copied().collect();
        if params.iter().any(|z| !z.is_finite()) {
            return Err(Error::Shape("logits must be finite".into()));
        }
        Ok(TabularPolicy {
            queries,
            answers,
            params,
        })
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn answers(&self) -> usize {
        self.answers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn logits1(&self) -> &[f64] {
        &self.params[..self.queries * self.answers]
    }

    pub fn logits2(&self) -> &[f64] {
        &self.params[self.queries * self.answers..]
    }

    pub(crate) fn row1_offset(&self, q: usize) -> usize {
        q * self.answers
    }

    pub(crate) fn row2_offset(&self, q: usize, y1: usize) -> usize {
        self.queries * self.answers + (q * self.answers + y1) * self.answers
    }

    fn check_query(&self, q: usize) -> Result<()> {
        if q >= self.queries {
            return Err(Error::UnknownQuery {
                id: q,
                count: self.queries,
            });
        }
        Ok(())
    }

    fn check_answer(&self, a: AnswerId) -> Result<()> {
        if a.0 >= self.answers {
            return Err(Error::InvalidAnswer {
                answer: a.0,
                vocab: self.answers,
            });
        }
        Ok(())
    }

    pub fn turn1_row(&self, q: usize) -> Result<&[f64]> {
        self.check_query(q)?;
        let o = self.row1_offset(q);
        Ok(&self.params[o..o + self.answers])
    }

    pub fn turn1_row_mut(&mut self, q: usize) -> Result<&mut [f64]> {
        self.check_query(q)?;
        let o = self.row1_offset(q);
        let v = self.answers;
        Ok(&mut self.params[o..o + v])
    }

    pub fn turn2_row(&self, q: usize, y1: AnswerId) -> Result<&[f64]> {
        self.check_query(q)?;
        self.check_answer(y1)?;
        let o = self.row2_offset(q, y1.0);
        Ok(&self.params[o..o + self.answers])
    }

    pub fn turn2_row_mut(&mut self, q: usize, y1: AnswerId) -> Result<&mut [f64]> {
        self.check_query(q)?;
        self.check_answer(y1)?;
        let o = self.row2_offset(q, y1.0);
        let v = self.answers;
        Ok(&mut self.params[o..o + v])
    }

    /// `pi(. | q)`.
    pub fn turn1_dist(&self, q: &Query) -> Result<Vec<f64>> {
        Ok(softmax(self.turn1_row(q.id)?))
    }

    /// `pi(. | q, y1, x)`.
    pub fn turn2_dist(&self, q: &Query, y1: AnswerId) -> Result<Vec<f64>> {
        Ok(softmax(self.turn2_row(q.id, y1)?))
    }

    pub fn turn1_log_prob(&self, q: usize, a: AnswerId) -> Result<f64> {
        self.check_answer(a)?;
        Ok(log_softmax(self.turn1_row(q)?)[a.0])
    }

    pub fn turn2_log_prob(&self, q: usize, y1: AnswerId, a: AnswerId) -> Result<f64> {
        self.check_answer(a)?;
        Ok(log_softmax(self.turn2_row(q, y1)?)[a.0])
    }

    /// Log-probability of both turns of `t` under this policy.
    pub fn trajectory_log_probs(&self, t: &Trajectory) -> Result<(f64, f64)> {
        Ok((
            self.turn1_log_prob(t.query_id, t.turn1.answer)?,
            self.turn2_log_prob(t.query_id, t.turn1.answer, t.turn2.answer)?,
        ))
    }

    pub fn sample_trajectory<R: Rng + ?Sized>(&self, q: &Query, rng: &mut R) -> Result<Trajectory> {
        self.sample_trajectory_with_faults(q, rng, 0.0)
    }

    /// Samples `(y1, y2)`; with `truncation_prob > 0` each turn is independently
    /// flagged as truncated, to exercise the truncation filter.
    pub fn sample_trajectory_with_faults<R: Rng + ?Sized>(
        &self,
        q: &Query,
        rng: &mut R,
        truncation_prob: f64,
    ) -> Result<Trajectory> {
        let lp1 = log_softmax(self.turn1_row(q.id)?);
        let y1 = sample_index(&lp1, rng);
        let lp2 = log_softmax(self.turn2_row(q.id, AnswerId(y1))?);
        let y2 = sample_index(&lp2, rng);
        let mut turn1 = TurnResponse::new(AnswerId(y1), lp1[y1]);
        let mut turn2 = TurnResponse::new(AnswerId(y2), lp2[y2]);
        if truncation_prob > 0.0 {
            turn1.truncated = rng.random::<f64>() < truncation_prob;
            turn2.truncated = rng.random::<f64>() < truncation_prob;
        }
        Ok(Trajectory::new(q, turn1, turn2))
    }

    /// Per-turn argmax, ties broken towards the lowest answer id.
    pub fn greedy_rollout(&self, q: &Query) -> Result<(AnswerId, AnswerId)> {
        let y1 = AnswerId(argmax(self.turn1_row(q.id)?));
        let y2 = AnswerId(argmax(self.turn2_row(q.id, y1)?));
        Ok((y1, y2))
    }

    /// Score function `d log pi(y1, y2) / d logits` of one trajectory.
    pub fn grad_log_prob(&self, t: &Trajectory) -> Result<PolicyGradient> {
        let mut g = PolicyGradient::zeros(self.queries, self.answers);
        self.accumulate_grad_log_prob(t, 1.0, 1.0, &mut g)?;
        Ok(g)
    }

    /// Adds `w1 * d log pi(y1|q)` and `w2 * d log pi(y2|q,y1)` into `grad`.
    pub fn accumulate_grad_log_prob(&self, t: &Trajectory, w1: f64, w2: f64, grad: &mut PolicyGradient) -> Result<()> {
        let q = t.query_id;
        let (y1, y2) = (t.turn1.answer, t.turn2.answer);
        if w1 != 0.0 {
            let p1 = softmax(self.turn1_row(q)?);
            self.check_answer(y1)?;
            let o = self.row1_offset(q);
            for (a, p) in p1.iter().enumerate() {
                let indicator = if a == y1.0 { 1.0 } else { 0.0 };
                grad.values[o + a] += w1 * (indicator - p);
            }
        }
        if w2 != 0.0 {
            let p2 = softmax(self.turn2_row(q, y1)?);
            self.check_answer(y2)?;
            let o = self.row2_offset(q, y1.0);
            for (a, p) in p2.iter().enumerate() {
                let indicator = if a == y2.0 { 1.0 } else { 0.0 };
                grad.values[o + a] += w2 * (indicator - p);
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot(self.clone())
    }

    pub fn apply_gradient_step(&mut self, grad: &PolicyGradient, step: f64) {
        for (p, g) in self.params.iter_mut().zip(&grad.values) {
            *p -= step * g;
        }
    }

    pub fn save_checkpoint(&self, path: &Path, seed: u64) -> Result<()> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            queries: self.queries,
            answers: self.answers,
            seed,
            logits1: self.logits1().to_vec(),
            logits2: self.logits2().to_vec(),
        };
        let json = serde_json::to_string(&ckpt)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint, returning the policy and the seed stored in its header.
    pub fn load_checkpoint(path: &Path) -> Result<(Self, u64)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Shape(format!("unknown checkpoint format `{}`", ckpt.format)));
        }
        let policy = TabularPolicy::from_logits(ckpt.queries, ckpt.answers, &ckpt.logits1, &ckpt.logits2)?;
        Ok((policy, ckpt.seed))
    }
}

fn sample_index<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let weights = log_probs.iter().map(|lp| lp.exp());
    WeightedIndex::new(weights)
        .expect("softmax weights are positive and finite")
        .sample(rng)
}

pub const CHECKPOINT_FORMAT: &str = "adapo-policy-v1";

/// On-disk policy checkpoint. `logits1` is row-major `[Q][V]`, `logits2` is
/// row-major `[Q][V][V]` indexed by (query, first answer, second answer).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    queries: usize,
    answers: usize,
    seed: u64,
    logits1: Vec<f64>,
    logits2: Vec<f64>,
}

impl PolicyGradient {
    pub fn zeros(queries: usize, answers: usize) -> Self {
        PolicyGradient {
            queries,
            answers,
            values: vec![0.0; param_len(queries, answers)],
        }
    }

    pub fn zeros_like(policy: &TabularPolicy) -> Self {
        Self::zeros(policy.queries, policy.answers)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn turn1_row(&self, q: usize) -> &[f64] {
        let o = q * self.answers;
        &self.values[o..o + self.answers]
    }

    pub fn turn2_row(&self, q: usize, y1: usize) -> &[f64] {
        let o = self.queries * self.answers + (q * self.answers + y1) * self.answers;
        &self.values[o..o + self.answers]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &PolicyGradient, scale: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}
