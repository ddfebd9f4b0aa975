//! Training loop for AdaPO, fixed-reward GRPO and two-stage SCoRe.
//!
//! One iteration samples a batch of queries, rolls out `G` two-turn
//! trajectories per query from the current policy, scores them, drops
//! truncated trajectories and zero-advantage groups, and takes one Adam step on
//! the mean surrogate loss of the surviving groups. Only the reward source and
//! the KL coefficients differ between algorithms.

use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{estimate_proficiency, reward_table, RewardConfig};
use crate::domain::{TrajectoryType, TypeCounts, TypeTable};
use crate::dynkl::{kl_coefficients, KlCoefficients, KlConfig};
use crate::env::TaskSuite;
use crate::error::{Error, Result};
use crate::filter::{truncation_filter, zero_advantage_filter, FilterDecision};
use crate::grpo::{group_advantages, surrogate_loss_and_grad, ScoredGroup};
use crate::metrics::{evaluate, EvalMetrics, RunLog};
use crate::optim::{Adam, AdamConfig};
use crate::policy::{PolicyGradient, TabularPolicy};
use crate::rng::{purpose, stream};

/// Consecutive fully-filtered iterations after which training aborts.
pub const STARVATION_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Adapo,
    GrpoFixed,
    Score,
}

/// Static reward table and KL coefficients of the fixed-reward baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedRewardConfig {
    pub rewards: TypeTable<f64>,
    pub beta1: f64,
    pub beta2: f64,
}

impl FixedRewardConfig {
    /// Pays a correction more than a kept correct answer.
    pub fn correction_favoring() -> Self {
        FixedRewardConfig {
            rewards: TypeTable::new(1.0, -1.0, 2.0, -1.0),
            beta1: 0.001,
            beta2: 0.001,
        }
    }

    /// Pays a kept correct answer more than a correction.
    pub fn preservation_favoring() -> Self {
        FixedRewardConfig {
            rewards: TypeTable::new(2.0, -1.0, 1.0, -1.0),
            beta1: 0.001,
            beta2: 0.001,
        }
    }
}

/// SCoRe schedule. `beta2` is the strong stage-1 penalty on the first turn and
/// `beta1` the stage-2 penalty applied to both turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    pub stage1_iterations: usize,
    pub stage2_iterations: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl ScoreConfig {
    /// Default coefficients with a 30/70 split of `iterations`.
    pub fn for_iterations(iterations: usize) -> Self {
        let stage1 = (iterations * 3 / 10).max(1);
        ScoreConfig {
            stage1_iterations: stage1,
            stage2_iterations: iterations.saturating_sub(stage1),
            alpha: 10.0,
            beta1: 0.01,
            beta2: 0.1,
        }
    }

    pub fn stage_at(&self, iteration: usize) -> u8 {
        if iteration < self.stage1_iterations {
            1
        } else {
            2
        }
    }

    /// Per-turn KL coefficients for a stage.
    pub fn betas(&self, stage: u8) -> KlCoefficients {
        if stage == 1 {
            KlCoefficients {
                beta1: self.beta2,
                beta2: 0.0,
            }
        } else {
            KlCoefficients {
                beta1: self.beta1,
                beta2: self.beta1,
            }
        }
    }
}

/// Optimisation settings (the `trainer` section of a run file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerSettings {
    pub algorithm: Algorithm,
    pub group_size: usize,
    /// Queries per iteration; `None` uses the whole training suite.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub iterations: usize,
    pub clip_epsilon: f64,
    /// Probability of flagging each sampled turn as truncated.
    pub truncation_prob: f64,
    pub fixed: Option<FixedRewardConfig>,
    pub score: Option<ScoreConfig>,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        TrainerSettings {
            algorithm: Algorithm::Adapo,
            group_size: 8,
            batch_size: None,
            learning_rate: 0.05,
            adam: AdamConfig::default(),
            iterations: 1000,
            clip_epsilon: 0.25,
            truncation_prob: 0.0,
            fixed: None,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub trainer: TrainerSettings,
    pub reward: RewardConfig,
    pub kl: KlConfig,
    pub eval_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            trainer: TrainerSettings::default(),
            reward: RewardConfig::default(),
            kl: KlConfig::default(),
            eval_interval: 10,
            seed: 0,
        }
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, "non-negative", format!("must be finite and >= 0, got {v}")))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.trainer;
        if t.group_size < 2 {
            return Err(Error::config(
                "trainer.group_size",
                "min",
                format!("group size must be at least 2, got {}", t.group_size),
            ));
        }
        if t.batch_size == Some(0) {
            return Err(Error::config("trainer.batch_size", "min", "batch size must be at least 1"));
        }
        non_negative("trainer.learning_rate", t.learning_rate)?;
        t.adam.validate()?;
        if t.iterations == 0 {
            return Err(Error::config("trainer.iterations", "min", "need at least 1 iteration"));
        }
        if !(t.clip_epsilon > 0.0 && t.clip_epsilon < 1.0) {
            return Err(Error::config(
                "trainer.clip_epsilon",
                "range",
                format!("clip epsilon must lie in (0, 1), got {}", t.clip_epsilon),
            ));
        }
        if !(0.0..1.0).contains(&t.truncation_prob) {
            return Err(Error::config(
                "trainer.truncation_prob",
                "range",
                format!("truncation probability must lie in [0, 1), got {}", t.truncation_prob),
            ));
        }
        if self.eval_interval == 0 {
            return Err(Error::config("metrics.eval_interval", "min", "eval interval must be at least 1"));
        }
        self.reward.validate()?;
        self.kl.validate()?;
        match t.algorithm {
            Algorithm::Adapo => {}
            Algorithm::GrpoFixed => {
                let f = t
                    .fixed
                    .ok_or_else(|| Error::config("trainer.fixed", "required", "grpo_fixed needs a `fixed` section"))?;
                if TrajectoryType::ALL.iter().any(|&ty| !f.rewards.get(ty).is_finite()) {
                    return Err(Error::config("trainer.fixed.rewards", "finite", "every reward must be finite"));
                }
                non_negative("trainer.fixed.beta1", f.beta1)?;
                non_negative("trainer.fixed.beta2", f.beta2)?;
            }
            Algorithm::Score => {
                let s = t
                    .score
                    .ok_or_else(|| Error::config("trainer.score", "required", "score needs a `score` section"))?;
                if s.stage1_iterations == 0 || s.stage2_iterations == 0 {
                    return Err(Error::config(
                        "trainer.score.stage1_iterations",
                        "min",
                        "both stages need at least 1 iteration",
                    ));
                }
                if s.stage1_iterations + s.stage2_iterations != t.iterations {
                    return Err(Error::config(
                        "trainer.score.stage2_iterations",
                        "sum",
                        format!(
                            "stage lengths {} + {} must add up to trainer.iterations = {}",
                            s.stage1_iterations, s.stage2_iterations, t.iterations
                        ),
                    ));
                }
                if !s.alpha.is_finite() {
                    return Err(Error::config("trainer.score.alpha", "finite", "alpha must be finite"));
                }
                non_negative("trainer.score.beta1", s.beta1)?;
                non_negative("trainer.score.beta2", s.beta2)?;
            }
        }
        Ok(())
    }
}

/// SCoRe reward: stage 1 pays second-attempt correctness, stage 2 pays both
/// attempts plus `alpha` for a fix and minus `alpha` for a regression.
pub fn score_reward(ttype: TrajectoryType, stage: u8, alpha: f64) -> Result<f64> {
    let c = |b: bool| if b { 1.0 } else { 0.0 };
    match stage {
        1 => Ok(c(ttype.second_correct())),
        2 => {
            let shaping = match ttype {
                TrajectoryType::ZeroOne => alpha,
                TrajectoryType::OneZero => -alpha,
                _ => 0.0,
            };
            Ok(c(ttype.first_correct()) + c(ttype.second_correct()) + shaping)
        }
        s => Err(Error::InvalidStage(s)),
    }
}

pub fn fixed_reward(ttype: TrajectoryType, table: &TypeTable<f64>) -> f64 {
    table.get(ttype)
}

/// AdaPO reward table and KL coefficients of a query with error rate `p0_star`.
pub fn adapo_rewards_and_betas(p0_star: f64, reward: &RewardConfig, kl: &KlConfig) -> (TypeTable<f64>, KlCoefficients) {
    let table = reward_table(p0_star, reward);
    let betas = kl_coefficients(table.zero_one, table.one_one, kl);
    (table, betas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFate {
    Kept,
    /// Fewer than two trajectories survived the truncation filter.
    Truncated,
    ZeroAdvantage,
}

/// Per-query internals of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryStat {
    pub query_id: usize,
    pub p0_star: f64,
    pub r01: f64,
    pub r11: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub fate: GroupFate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based index of the completed update.
    pub iteration: usize,
    /// Sampled types of the groups that reached the optimizer.
    pub type_counts: TypeCounts,
    pub mean_p0_star: f64,
    pub mean_beta1: f64,
    pub mean_beta2: f64,
    /// Mean surrogate loss over kept groups, `None` when none survived.
    pub loss: Option<f64>,
    pub n_filtered: usize,
    pub eval: Option<EvalMetrics>,
    pub query_stats: Vec<QueryStat>,
}

/// One query's rollouts and scoring.
#[derive(Debug, Clone)]
pub struct GroupOutcome {
    pub stat: QueryStat,
    pub sampled_types: TypeCounts,
    pub betas: KlCoefficients,
    /// Present iff `stat.fate == Kept`.
    pub group: Option<ScoredGroup>,
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// 0-based iteration the batch was drawn for.
    pub iteration: usize,
    pub groups: Vec<GroupOutcome>,
}

impl Batch {
    pub fn kept(&self) -> impl Iterator<Item = (&ScoredGroup, KlCoefficients)> {
        self.groups.iter().filter_map(|g| g.group.as_ref().map(|sg| (sg, g.betas)))
    }
}

/// Stateful trainer over a training suite, evaluating on `eval_suite`.
pub struct Trainer {
    cfg: TrainConfig,
    train_suite: TaskSuite,
    eval_suite: TaskSuite,
    policy: TabularPolicy,
    reference: TabularPolicy,
    adam: Adam,
    iteration: usize,
    starved: usize,
}

fn check_shape(suite: &TaskSuite, policy: &TabularPolicy) -> Result<()> {
    if suite.answers != policy.answers() {
        return Err(Error::Shape(format!(
            "suite has {} answers, policy {}",
            suite.answers,
            policy.answers()
        )));
    }
    if let Some(q) = suite.queries.iter().find(|q| q.id >= policy.queries() || q.ground_truth.0 >= suite.answers) {
        return Err(Error::Shape(format!("query {} does not fit the policy table", q.id)));
    }
    Ok(())
}

impl Trainer {
    pub fn new(cfg: TrainConfig, train_suite: TaskSuite, eval_suite: TaskSuite, policy: TabularPolicy) -> Result<Self> {
        cfg.validate()?;
        check_shape(&train_suite, &policy)?;
        check_shape(&eval_suite, &policy)?;
        if train_suite.is_empty() || eval_suite.is_empty() {
            return Err(Error::EmptySuite);
        }
        let adam = Adam::new(policy.params().len(), cfg.trainer.learning_rate, cfg.trainer.adam);
        Ok(Trainer {
            reference: policy.clone(),
            cfg,
            train_suite,
            eval_suite,
            policy,
            adam,
            iteration: 0,
            starved: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &TabularPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut TabularPolicy {
        &mut self.policy
    }

    pub fn reference(&self) -> &TabularPolicy {
        &self.reference
    }

    pub fn into_policy(self) -> TabularPolicy {
        self.policy
    }

    /// Number of updates taken so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn batch_ids(&self) -> Result<Vec<usize>> {
        let n = self.train_suite.len();
        match self.cfg.trainer.batch_size {
            None => Ok((0..n).collect()),
            Some(b) if b > n => Err(Error::config(
                "trainer.batch_size",
                "max",
                format!("batch size {b} exceeds the {n} training queries"),
            )),
            Some(b) if b == n => Ok((0..n).collect()),
            Some(b) => {
                let mut rng = stream(self.cfg.seed, &[purpose::BATCH, self.iteration as u64]);
                let mut idx = sample(&mut rng, n, b).into_vec();
                idx.sort_unstable();
                Ok(idx)
            }
        }
    }

    /// Samples and scores the batch for the current iteration without updating.
    pub fn collect(&self) -> Result<Batch> {
        let old = self.policy.snapshot();
        let ids = self.batch_ids()?;
        let t = &self.cfg.trainer;
        let groups = ids
            .par_iter()
            .map(|&i| {
                let q = &self.train_suite.queries[i];
                let mut rng = stream(self.cfg.seed, &[purpose::ROLLOUT, self.iteration as u64, q.id as u64]);
                let mut trajectories = Vec::with_capacity(t.group_size);
                for _ in 0..t.group_size {
                    trajectories.push(old.sample_trajectory_with_faults(q, &mut rng, t.truncation_prob)?);
                }
                let first: Vec<bool> = trajectories.iter().map(|tr| tr.ttype.first_correct()).collect();
                let p0 = estimate_proficiency(&first)?.p0_star;
                let sampled_types = TypeCounts::from_types(trajectories.iter().map(|tr| tr.ttype));
                let (table, betas) = self.rewards_and_betas(p0)?;

                trajectories.retain(|tr| truncation_filter(tr) == FilterDecision::Keep);
                let rewards: Vec<f64> = trajectories.iter().map(|tr| table.get(tr.ttype)).collect();
                let fate = if trajectories.len() < 2 {
                    GroupFate::Truncated
                } else if zero_advantage_filter(&rewards) == FilterDecision::Discard {
                    GroupFate::ZeroAdvantage
                } else {
                    GroupFate::Kept
                };
                let group = if fate == GroupFate::Kept {
                    Some(ScoredGroup {
                        query_id: q.id,
                        trajectories,
                        advantages: group_advantages(&rewards)?,
                    })
                } else {
                    None
                };
                Ok(GroupOutcome {
                    stat: QueryStat {
                        query_id: q.id,
                        p0_star: p0,
                        r01: table.zero_one,
                        r11: table.one_one,
                        beta1: betas.beta1,
                        beta2: betas.beta2,
                        fate,
                    },
                    sampled_types,
                    betas,
                    group,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch {
            iteration: self.iteration,
            groups,
        })
    }

    fn rewards_and_betas(&self, p0_star: f64) -> Result<(TypeTable<f64>, KlCoefficients)> {
        let t = &self.cfg.trainer;
        match t.algorithm {
            Algorithm::Adapo => Ok(adapo_rewards_and_betas(p0_star, &self.cfg.reward, &self.cfg.kl)),
            Algorithm::GrpoFixed => {
                let f = t.fixed.expect("validated");
                Ok((
                    f.rewards,
                    KlCoefficients {
                        beta1: f.beta1,
                        beta2: f.beta2,
                    },
                ))
            }
            Algorithm::Score => {
                let s = t.score.expect("validated");
                let stage = s.stage_at(self.iteration);
                let r = |ty| score_reward(ty, stage, s.alpha);
                let table = TypeTable::new(
                    r(TrajectoryType::OneOne)?,
                    r(TrajectoryType::OneZero)?,
                    r(TrajectoryType::ZeroOne)?,
                    r(TrajectoryType::ZeroZero)?,
                );
                Ok((table, s.betas(stage)))
            }
        }
    }

    /// Mean surrogate loss over the kept groups of `batch` under the current
    /// policy, and its gradient. `None` when no group was kept.
    pub fn batch_loss_and_grad(&self, batch: &Batch) -> Result<(Option<f64>, PolicyGradient)> {
        let mut grad = PolicyGradient::zeros_like(&self.policy);
        let n_kept = batch.kept().count();
        if n_kept == 0 {
            return Ok((None, grad));
        }
        let weight = 1.0 / n_kept as f64;
        let mut loss = 0.0;
        for (group, betas) in batch.kept() {
            loss += weight
                * surrogate_loss_and_grad(
                    &self.policy,
                    &self.reference,
                    group,
                    betas,
                    self.cfg.trainer.clip_epsilon,
                    weight,
                    &mut grad,
                )?;
        }
        Ok((Some(loss), grad))
    }

    /// Runs one full iteration and returns its record.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let batch = self.collect()?;
        self.apply(&batch)
    }

    /// Takes the update for a batch returned by [`Trainer::collect`] at the
    /// current iteration.
    pub fn apply(&mut self, batch: &Batch) -> Result<IterationRecord> {
        if batch.iteration != self.iteration {
            return Err(Error::Shape(format!(
                "batch was drawn for iteration {}, trainer is at {}",
                batch.iteration, self.iteration
            )));
        }
        let (loss, grad) = self.batch_loss_and_grad(batch)?;
        if loss.is_some() {
            self.starved = 0;
            self.adam.step(self.policy.params_mut(), grad.values());
        } else {
            self.starved += 1;
            if self.starved >= STARVATION_LIMIT {
                return Err(Error::StarvedBatch(self.starved));
            }
        }
        self.iteration += 1;

        let n = batch.groups.len() as f64;
        let mut type_counts = TypeCounts::default();
        for g in batch.groups.iter().filter(|g| g.group.is_some()) {
            type_counts.add(&g.sampled_types);
        }
        let eval = if self.iteration % self.cfg.eval_interval == 0 {
            Some(evaluate(&self.policy, &self.eval_suite)?)
        } else {
            None
        };
        Ok(IterationRecord {
            iteration: self.iteration,
            type_counts,
            mean_p0_star: batch.groups.iter().map(|g| g.stat.p0_star).sum::<f64>() / n,
            mean_beta1: batch.groups.iter().map(|g| g.betas.beta1).sum::<f64>() / n,
            mean_beta2: batch.groups.iter().map(|g| g.betas.beta2).sum::<f64>() / n,
            loss,
            n_filtered: batch.groups.iter().filter(|g| g.group.is_none()).count(),
            eval,
            query_stats: batch.groups.iter().map(|g| g.stat).collect(),
        })
    }

    /// Runs the configured number of iterations.
    pub fn run(&mut self) -> Result<RunLog> {
        let start = Instant::now();
        let initial_metrics = evaluate(&self.policy, &self.eval_suite)?;
        let mut records = Vec::with_capacity(self.cfg.trainer.iterations);
        while self.iteration < self.cfg.trainer.iterations {
            records.push(self.step()?);
        }
        Ok(RunLog {
            config: serde_json::to_value(&self.cfg)?,
            eval_interval: self.cfg.eval_interval,
            initial_metrics,
            records,
            final_metrics: evaluate(&self.policy, &self.eval_suite)?,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Trains `policy` in place on `suite`, evaluating on the same suite.
pub fn train(config: &TrainConfig, suite: &TaskSuite, policy: &mut TabularPolicy) -> Result<RunLog> {
    let mut trainer = Trainer::new(config.clone(), suite.clone(), suite.clone(), policy.clone())?;
    let log = trainer.run()?;
    *policy = trainer.into_policy();
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_suite, DifficultySpec};

    fn small_cfg(algorithm: Algorithm, iterations: usize) -> TrainConfig {
        TrainConfig {
            trainer: TrainerSettings {
                algorithm,
                iterations,
                fixed: Some(FixedRewardConfig::correction_favoring()),
                score: Some(ScoreConfig::for_iterations(iterations)),
                ..TrainerSettings::default()
            },
            eval_interval: 5,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn suite() -> (TaskSuite, TabularPolicy) {
        make_suite(12, 4, &DifficultySpec::default(), 5).unwrap()
    }

    #[test]
    fn score_reward_examples() {
        assert_eq!(score_reward(TrajectoryType::ZeroOne, 2, 10.0).unwrap(), 11.0);
        assert_eq!(score_reward(TrajectoryType::OneZero, 2, 10.0).unwrap(), -9.0);
        assert_eq!(score_reward(TrajectoryType::OneOne, 2, 10.0).unwrap(), 2.0);
        assert_eq!(score_reward(TrajectoryType::ZeroZero, 2, 10.0).unwrap(), 0.0);
        assert_eq!(score_reward(TrajectoryType::OneOne, 1, 10.0).unwrap(), 1.0);
        assert_eq!(score_reward(TrajectoryType::OneZero, 1, 10.0).unwrap(), 0.0);
        assert!(matches!(score_reward(TrajectoryType::OneOne, 3, 10.0), Err(Error::InvalidStage(3))));
    }

    #[test]
    fn presets_keep_their_ordering() {
        let c = FixedRewardConfig::correction_favoring().rewards;
        let p = FixedRewardConfig::preservation_favoring().rewards;
        assert!(c.zero_one > c.one_one);
        assert!(p.one_one > p.zero_one);
        for ty in TrajectoryType::ALL {
            assert!(fixed_reward(ty, &c).is_finite() && fixed_reward(ty, &p).is_finite());
        }
    }

    #[test]
    fn adapo_at_threshold_is_symmetric_grpo() {
        let reward = RewardConfig::default();
        let kl = KlConfig::default();
        let (table, betas) = adapo_rewards_and_betas(reward.theta, &reward, &kl);
        assert!((table.one_one - 1.0).abs() < 1e-12);
        assert!((table.zero_one - 1.0).abs() < 1e-12);
        assert_eq!(betas.beta1, kl.beta_base);
        assert_eq!(betas.beta2, kl.beta_base);
    }

    #[test]
    fn zero_learning_rate_leaves_policy() {
        let (s, p0) = suite();
        let mut cfg = small_cfg(Algorithm::Adapo, 5);
        cfg.trainer.learning_rate = 0.0;
        let mut p = p0.clone();
        train(&cfg, &s, &mut p).unwrap();
        assert_eq!(p.params(), p0.params());
    }

    #[test]
    fn runs_are_deterministic() {
        let (s, p0) = suite();
        for alg in [Algorithm::Adapo, Algorithm::GrpoFixed, Algorithm::Score] {
            let cfg = small_cfg(alg, 10);
            let (mut a, mut b) = (p0.clone(), p0.clone());
            let la = train(&cfg, &s, &mut a).unwrap();
            let lb = train(&cfg, &s, &mut b).unwrap();
            assert_eq!(la.records, lb.records);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn counts_cover_kept_groups() {
        let (s, p0) = suite();
        let cfg = small_cfg(Algorithm::Adapo, 10);
        let mut p = p0.clone();
        let log = train(&cfg, &s, &mut p).unwrap();
        for r in &log.records {
            let g = cfg.trainer.group_size;
            assert_eq!(r.type_counts.total(), g * (s.len() - r.n_filtered));
            assert_eq!(r.eval.is_some(), r.iteration % 5 == 0);
        }
    }

    #[test]
    fn score_stage_lengths_must_sum() {
        let mut cfg = small_cfg(Algorithm::Score, 10);
        cfg.trainer.score.as_mut().unwrap().stage2_iterations = 3;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("trainer.score"));
        let mut cfg = small_cfg(Algorithm::Adapo, 10);
        cfg.trainer.group_size = 1;
        assert!(cfg.validate().unwrap_err().to_string().contains("trainer.group_size"));
    }

    #[test]
    fn score_betas_follow_stage() {
        let s = ScoreConfig::for_iterations(100);
        assert_eq!(s.stage_at(29), 1);
        assert_eq!(s.stage_at(30), 2);
        assert_eq!(s.betas(1).beta1, 0.1);
        assert_eq!(s.betas(1).beta2, 0.0);
        assert_eq!(s.betas(2).beta1, 0.01);
        assert_eq!(s.betas(2).beta2, 0.01);
    }
}
