//! Synthetic task suites and the brute-force trajectory enumerator.
//!
//! Each query gets a random ground-truth answer and a difficulty bonus `b_q`
//! added to the ground-truth logit of its turn-1 row. Drawing `b_q` from a wide
//! range mixes easy and hard queries, so a single batch holds queries on both
//! sides of the reward model's threshold. Turn-2 rows start with a bias
//! towards repeating the first answer plus a weaker pull towards the ground
//! truth, i.e. an untrained model that mostly sticks with its first answer.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{AnswerId, Query, Trajectory, TurnResponse};
use crate::error::{Error, Result};
use crate::metrics::greedy_accuracy_t1;
use crate::policy::{log_softmax, TabularPolicy};
use crate::rng::{purpose, stream};

pub const MAX_SUITE_RETRIES: usize = 100;
pub const MAX_ENUMERATION_VOCAB: usize = 16;

/// How initial policies are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifficultySpec {
    /// Accepted band `[lo, hi]` for the initial greedy turn-1 accuracy.
    pub target_acc: [f64; 2],
    /// Range `[lo, hi)` of the per-query ground-truth bonus `b_q`.
    pub bonus_range: [f64; 2],
    /// Standard deviation of the Gaussian noise on turn-1 logits.
    pub noise_std: f64,
    /// Standard deviation of the Gaussian noise on turn-2 logits.
    pub turn2_noise_std: f64,
    /// Turn-2 bonus on repeating the first answer.
    pub copy_bias: f64,
    /// Turn-2 ground-truth bonus, as a multiple of `b_q`.
    pub turn2_knowledge: f64,
    /// Turn-2 ground-truth bonus added to every query.
    pub turn2_offset: f64,
}

impl Default for DifficultySpec {
    fn default() -> Self {
        DifficultySpec {
            target_acc: [0.55, 0.65],
            bonus_range: [-3.5, 3.5],
            noise_std: 0.1,
            turn2_noise_std: 0.1,
            copy_bias: 1.5,
            turn2_knowledge: 0.25,
            turn2_offset: 0.0,
        }
    }
}

impl DifficultySpec {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.target_acc;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::config(
                "env.difficulty.target_acc",
                "band",
                format!("target band must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"),
            ));
        }
        let [blo, bhi] = self.bonus_range;
        if !(blo.is_finite() && bhi.is_finite() && blo <= bhi) {
            return Err(Error::config(
                "env.difficulty.bonus_range",
                "range",
                format!("bonus range must be finite with lo <= hi, got [{blo}, {bhi}]"),
            ));
        }
        for (key, v) in [
            ("env.difficulty.noise_std", self.noise_std),
            ("env.difficulty.turn2_noise_std", self.turn2_noise_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "non-negative", format!("must be >= 0, got {v}")));
            }
        }
        for (key, v) in [
            ("env.difficulty.copy_bias", self.copy_bias),
            ("env.difficulty.turn2_knowledge", self.turn2_knowledge),
            ("env.difficulty.turn2_offset", self.turn2_offset),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "finite", format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub queries: Vec<Query>,
    pub answers: usize,
    /// Ground-truth bonus `b_q` used to initialise each query.
    pub difficulty_profile: Vec<f64>,
    pub seed: u64,
}

impl TaskSuite {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// The sub-suite holding only the given query ids (order preserved).
    pub fn subset(&self, ids: &[usize]) -> TaskSuite {
        let keep: std::collections::BTreeSet<usize> = ids.iter().copied().collect();
        let mut queries = Vec::new();
        let mut profile = Vec::new();
        for (q, b) in self.queries.iter().zip(&self.difficulty_profile) {
            if keep.contains(&q.id) {
                queries.push(*q);
                profile.push(*b);
            }
        }
        TaskSuite {
            queries,
            answers: self.answers,
            difficulty_profile: profile,
            seed: self.seed,
        }
    }
}

/// Builds a suite and its initial policy, redrawing (up to
/// [`MAX_SUITE_RETRIES`] times) until greedy turn-1 accuracy lands in
/// `spec.target_acc`.
pub fn make_suite(q_count: usize, v_count: usize, spec: &DifficultySpec, seed: u64) -> Result<(TaskSuite, TabularPolicy)> {
    if q_count < 2 {
        return Err(Error::config("env.queries", "min", format!("need at least 2 queries, got {q_count}")));
    }
    if v_count < 2 {
        return Err(Error::config("env.answers", "min", format!("need at least 2 answers, got {v_count}")));
    }
    spec.validate()?;
    let [lo, hi] = spec.target_acc;
    let mut last = f64::NAN;
    for attempt in 0..MAX_SUITE_RETRIES {
        let mut rng = stream(seed, &[purpose::SUITE, attempt as u64]);
        let (suite, policy) = draw_suite(q_count, v_count, spec, seed, &mut rng);
        let acc = greedy_accuracy_t1(&policy, &suite)?;
        if (lo..=hi).contains(&acc) {
            return Ok((suite, policy));
        }
        last = acc;
    }
    Err(Error::UnreachableTarget {
        lo,
        hi,
        retries: MAX_SUITE_RETRIES,
        last,
    })
}

fn draw_suite<R: Rng>(q_count: usize, v_count: usize, spec: &DifficultySpec, seed: u64, rng: &mut R) -> (TaskSuite, TabularPolicy) {
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise_std");
    let noise2 = Normal::new(0.0, spec.turn2_noise_std).expect("validated turn2_noise_std");
    let [blo, bhi] = spec.bonus_range;
    let mut policy = TabularPolicy::zeros(q_count, v_count);
    let mut queries = Vec::with_capacity(q_count);
    let mut profile = Vec::with_capacity(q_count);
    for id in 0..q_count {
        let gt = rng.random_range(0..v_count);
        let bonus = if bhi > blo { rng.random_range(blo..bhi) } else { blo };
        {
            let row = policy.turn1_row_mut(id).expect("in range");
            for (a, z) in row.iter_mut().enumerate() {
                *z = noise.sample(rng) + if a == gt { bonus } else { 0.0 };
            }
        }
        let turn2_bonus = spec.turn2_knowledge * bonus + spec.turn2_offset;
        for y1 in 0..v_count {
            let row = policy.turn2_row_mut(id, AnswerId(y1)).expect("in range");
            for (a, z) in row.iter_mut().enumerate() {
                *z = noise2.sample(rng);
                if a == y1 {
                    *z += spec.copy_bias;
                }
                if a == gt {
                    *z += turn2_bonus;
                }
            }
        }
        queries.push(Query {
            id,
            ground_truth: AnswerId(gt),
        });
        profile.push(bonus);
    }
    let suite = TaskSuite {
        queries,
        answers: v_count,
        difficulty_profile: profile,
        seed,
    };
    (suite, policy)
}

/// All `V^2` trajectories of a query with their exact probabilities.
pub fn enumerate_trajectories(policy: &TabularPolicy, q: &Query) -> Result<Vec<(Trajectory, f64)>> {
    let v = policy.answers();
    if v > MAX_ENUMERATION_VOCAB {
        return Err(Error::Feasibility {
            vocab: v,
            limit: MAX_ENUMERATION_VOCAB,
        });
    }
    let lp1 = log_softmax(policy.turn1_row(q.id)?);
    let mut out = Vec::with_capacity(v * v);
    for (y1, &l1) in lp1.iter().enumerate() {
        let lp2 = log_softmax(policy.turn2_row(q.id, AnswerId(y1))?);
        for (y2, &l2) in lp2.iter().enumerate() {
            let t = Trajectory::new(q, TurnResponse::new(AnswerId(y1), l1), TurnResponse::new(AnswerId(y2), l2));
            out.push((t, (l1 + l2).exp()));
        }
    }
    Ok(out)
}

/// Exact expectation of `f(trajectory)` under the policy.
pub fn exact_expectation(policy: &TabularPolicy, q: &Query, f: impl Fn(&Trajectory) -> f64) -> Result<f64> {
    Ok(enumerate_trajectories(policy, q)?.iter().map(|(t, p)| p * f(t)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TrajectoryType;

    #[test]
    fn suite_hits_target_band() {
        let (suite, policy) = make_suite(50, 4, &DifficultySpec::default(), 7).unwrap();
        let acc = greedy_accuracy_t1(&policy, &suite).unwrap();
        assert!((0.55..=0.65).contains(&acc), "{acc}");
        assert_eq!(suite.len(), 50);
        let mut ids: Vec<_> = suite.queries.iter().map(|q| q.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 50);
    }

    #[test]
    fn suite_is_deterministic() {
        let a = make_suite(20, 4, &DifficultySpec::default(), 11).unwrap();
        let b = make_suite(20, 4, &DifficultySpec::default(), 11).unwrap();
        assert_eq!(a, b);
        let c = make_suite(20, 4, &DifficultySpec::default(), 12).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn saturated_target() {
        let spec = DifficultySpec {
            target_acc: [1.0, 1.0],
            ..DifficultySpec::default()
        };
        let (suite, policy) = make_suite(2, 2, &spec, 3).unwrap();
        for q in &suite.queries {
            let row = policy.turn1_row(q.id).unwrap();
            let gt = q.ground_truth.0;
            assert!(row.iter().enumerate().all(|(a, &z)| a == gt || z < row[gt]));
        }
    }

    #[test]
    fn unreachable_band_errors() {
        let spec = DifficultySpec {
            target_acc: [0.9, 1.0],
            bonus_range: [-6.0, -5.0],
            ..DifficultySpec::default()
        };
        assert!(matches!(make_suite(10, 4, &spec, 1), Err(Error::UnreachableTarget { .. })));
        assert!(matches!(make_suite(1, 4, &DifficultySpec::default(), 1), Err(Error::Config { .. })));
        assert!(matches!(make_suite(4, 1, &DifficultySpec::default(), 1), Err(Error::Config { .. })));
    }

    #[test]
    fn enumeration_uniform_v2() {
        let policy = TabularPolicy::zeros(1, 2);
        let q = Query {
            id: 0,
            ground_truth: AnswerId(1),
        };
        let all = enumerate_trajectories(&policy, &q).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|(_, p)| (p - 0.25).abs() < 1e-15));
        let types: std::collections::BTreeSet<TrajectoryType> = all.iter().map(|(t, _)| t.ttype).collect();
        assert_eq!(types.len(), 4);
    }

    #[test]
    fn enumeration_sums_to_one() {
        let (suite, policy) = make_suite(5, 6, &DifficultySpec { target_acc: [0.0, 1.0], ..DifficultySpec::default() }, 2).unwrap();
        for q in &suite.queries {
            let total: f64 = enumerate_trajectories(&policy, q).unwrap().iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_rejects_large_vocab() {
        let policy = TabularPolicy::zeros(1, 17);
        let q = Query {
            id: 0,
            ground_truth: AnswerId(0),
        };
        assert!(matches!(enumerate_trajectories(&policy, &q), Err(Error::Feasibility { .. })));
    }
}
