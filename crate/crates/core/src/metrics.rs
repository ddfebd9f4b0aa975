//! Greedy evaluation metrics and run-log persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{verify, TrajectoryType, TypeCounts};
use crate::env::TaskSuite;
use crate::error::{Error, Result};
use crate::policy::TabularPolicy;
use crate::trainer::IterationRecord;

/// Accuracy before/after self-evaluation and the two transition rates.
///
/// `m_01` is the share of wrong first answers fixed at turn 2 and `m_10` the
/// share of right first answers broken at turn 2; each is `None` when its
/// denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub acc_t1: f64,
    pub acc_t2: f64,
    pub delta: f64,
    pub m_01: Option<f64>,
    pub m_10: Option<f64>,
    pub counts: TypeCounts,
}

impl EvalMetrics {
    pub fn from_counts(counts: TypeCounts) -> Result<Self> {
        let n = counts.total();
        if n == 0 {
            return Err(Error::EmptySuite);
        }
        let n = n as f64;
        let first_right = counts.one_one + counts.one_zero;
        let first_wrong = counts.zero_one + counts.zero_zero;
        let acc_t1 = first_right as f64 / n;
        let acc_t2 = (counts.one_one + counts.zero_one) as f64 / n;
        let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Ok(EvalMetrics {
            acc_t1,
            acc_t2,
            delta: acc_t2 - acc_t1,
            m_01: rate(counts.zero_one, first_wrong),
            m_10: rate(counts.one_zero, first_right),
            counts,
        })
    }

    /// `acc_t2 - (acc_t1 + m_01 (1 - acc_t1) - m_10 acc_t1)`; zero up to rounding.
    pub fn flow_residual(&self) -> f64 {
        let gained = self.m_01.unwrap_or(0.0) * (1.0 - self.acc_t1);
        let lost = self.m_10.unwrap_or(0.0) * self.acc_t1;
        self.acc_t2 - (self.acc_t1 + gained - lost)
    }
}

/// Greedy two-turn rollout of every query in `suite`.
pub fn evaluate(policy: &TabularPolicy, suite: &TaskSuite) -> Result<EvalMetrics> {
    if suite.is_empty() {
        return Err(Error::EmptySuite);
    }
    let mut counts = TypeCounts::default();
    for q in &suite.queries {
        let (y1, y2) = policy.greedy_rollout(q)?;
        let t = TrajectoryType::classify(verify(y1, q.ground_truth), verify(y2, q.ground_truth));
        *counts.get_mut(t) += 1;
    }
    EvalMetrics::from_counts(counts)
}

pub fn greedy_accuracy_t1(policy: &TabularPolicy, suite: &TaskSuite) -> Result<f64> {
    Ok(evaluate(policy, suite)?.acc_t1)
}

/// Everything a training run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    /// Echo of the configuration that produced the run.
    pub config: serde_json::Value,
    pub eval_interval: usize,
    pub initial_metrics: EvalMetrics,
    pub records: Vec<IterationRecord>,
    pub final_metrics: EvalMetrics,
    pub wall_clock_seconds: f64,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "iteration",
    "acc_t1",
    "acc_t2",
    "delta",
    "m_01",
    "m_10",
    "mean_p0_star",
    "mean_beta1",
    "mean_beta2",
    "loss",
    "n_filtered",
];

/// One CSV line. Field order defines the column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvRow {
    pub iteration: usize,
    pub acc_t1: f64,
    pub acc_t2: f64,
    pub delta: f64,
    pub m_01: Option<f64>,
    pub m_10: Option<f64>,
    pub mean_p0_star: Option<f64>,
    pub mean_beta1: Option<f64>,
    pub mean_beta2: Option<f64>,
    pub loss: Option<f64>,
    pub n_filtered: Option<usize>,
}

impl RunLog {
    /// Rows at iteration 0 (initial policy, no training columns) and at every
    /// evaluated iteration.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = vec![row_from(0, &self.initial_metrics, None)];
        for r in &self.records {
            if let Some(m) = &r.eval {
                rows.push(row_from(r.iteration, m, Some(r)));
            }
        }
        rows
    }
}

fn row_from(iteration: usize, m: &EvalMetrics, rec: Option<&IterationRecord>) -> CsvRow {
    CsvRow {
        iteration,
        acc_t1: m.acc_t1,
        acc_t2: m.acc_t2,
        delta: m.delta,
        m_01: m.m_01,
        m_10: m.m_10,
        mean_p0_star: rec.map(|r| r.mean_p0_star),
        mean_beta1: rec.map(|r| r.mean_beta1),
        mean_beta2: rec.map(|r| r.mean_beta2),
        loss: rec.and_then(|r| r.loss),
        n_filtered: rec.map(|r| r.n_filtered),
    }
}

/// Writes the learning-curve CSV. Undefined values are empty cells; numbers
/// use Rust's locale-independent shortest round-trip formatting.
pub fn write_csv(runlog: &RunLog, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in runlog.csv_rows() {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Condensed run summary persisted next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: serde_json::Value,
    pub iterations: usize,
    pub initial_metrics: EvalMetrics,
    pub final_metrics: EvalMetrics,
    pub wall_clock_seconds: f64,
}

impl RunSummary {
    pub fn from_runlog(runlog: &RunLog) -> Self {
        RunSummary {
            config: runlog.config.clone(),
            iterations: runlog.records.len(),
            initial_metrics: runlog.initial_metrics,
            final_metrics: runlog.final_metrics,
            wall_clock_seconds: runlog.wall_clock_seconds,
        }
    }
}

pub fn write_summary_json(runlog: &RunLog, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&RunSummary::from_runlog(runlog))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_summary_json(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AnswerId, Query};

    #[test]
    fn counting_example() {
        let m = EvalMetrics::from_counts(TypeCounts::new(6, 1, 2, 1)).unwrap();
        assert!((m.acc_t1 - 0.7).abs() < 1e-15);
        assert!((m.acc_t2 - 0.8).abs() < 1e-15);
        assert!((m.delta - 0.1).abs() < 1e-12);
        assert!((m.m_01.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.m_10.unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!(m.flow_residual().abs() < 1e-12);
    }

    #[test]
    fn always_correct_policy() {
        let suite = TaskSuite {
            queries: (0..3)
                .map(|id| Query {
                    id,
                    ground_truth: AnswerId(1),
                })
                .collect(),
            answers: 2,
            difficulty_profile: vec![0.0; 3],
            seed: 0,
        };
        let mut policy = TabularPolicy::zeros(3, 2);
        for q in 0..3 {
            policy.turn1_row_mut(q).unwrap()[1] = 5.0;
            policy.turn2_row_mut(q, AnswerId(1)).unwrap()[1] = 5.0;
        }
        let m = evaluate(&policy, &suite).unwrap();
        assert_eq!((m.acc_t1, m.acc_t2, m.delta), (1.0, 1.0, 0.0));
        assert_eq!(m.m_01, None);
        assert_eq!(m.m_10, Some(0.0));
        assert_eq!(m.flow_residual(), 0.0);
    }

    #[test]
    fn empty_suite_errors() {
        let suite = TaskSuite {
            queries: vec![],
            answers: 2,
            difficulty_profile: vec![],
            seed: 0,
        };
        assert!(matches!(evaluate(&TabularPolicy::zeros(1, 2), &suite), Err(Error::EmptySuite)));
    }

    #[test]
    fn csv_header_matches_contract() {
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(CsvRow {
            iteration: 0,
            acc_t1: 0.5,
            acc_t2: 0.25,
            delta: -0.25,
            m_01: None,
            m_10: Some(0.5),
            mean_p0_star: None,
            mean_beta1: None,
            mean_beta2: None,
            loss: None,
            n_filtered: None,
        })
        .unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,-0.25,,0.5,,,,,");
    }
}
