//! Offline suite filtering and online group/trajectory filtering.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Trajectory, TypeCounts};
use crate::env::TaskSuite;
use crate::error::{Error, Result};
use crate::policy::TabularPolicy;
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDecision {
    Keep,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub n_samples: usize,
    pub kept: Vec<usize>,
    pub dropped_easy: Vec<usize>,
    pub dropped_hard: Vec<usize>,
    /// Sampled trajectory-type histogram per query id.
    pub histograms: BTreeMap<usize, TypeCounts>,
}

/// Classifies a query from its sampled type histogram: all `1->1` is too
/// easy, all `0->0` too hard, anything else is kept.
pub fn classify_histogram(h: &TypeCounts) -> QueryVerdict {
    let n = h.total();
    if n > 0 && h.one_one == n {
        QueryVerdict::TooEasy
    } else if n > 0 && h.zero_zero == n {
        QueryVerdict::TooHard
    } else {
        QueryVerdict::Keep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryVerdict {
    Keep,
    TooEasy,
    TooHard,
}

/// Samples `n_samples` trajectories per query from `policy` and drops
/// queries whose samples are uniformly `1->1` or uniformly `0->0`.
pub fn offline_filter(policy: &TabularPolicy, suite: &TaskSuite, n_samples: usize, seed: u64) -> Result<FilterReport> {
    if n_samples < 2 {
        return Err(Error::config(
            "filter.offline_samples",
            "min",
            format!("need at least 2 samples per query, got {n_samples}"),
        ));
    }
    let histograms: Vec<(usize, TypeCounts)> = suite
        .queries
        .par_iter()
        .map(|q| {
            let mut rng = stream(seed, &[purpose::OFFLINE_FILTER, q.id as u64]);
            let mut types = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                types.push(policy.sample_trajectory(q, &mut rng)?.ttype);
            }
            Ok((q.id, TypeCounts::from_types(types)))
        })
        .collect::<Result<_>>()?;

    let mut report = FilterReport {
        n_samples,
        kept: Vec::new(),
        dropped_easy: Vec::new(),
        dropped_hard: Vec::new(),
        histograms: BTreeMap::new(),
    };
    for (id, h) in histograms {
        match classify_histogram(&h) {
            QueryVerdict::Keep => report.kept.push(id),
            QueryVerdict::TooEasy => report.dropped_easy.push(id),
            QueryVerdict::TooHard => report.dropped_hard.push(id),
        }
        report.histograms.insert(id, h);
    }
    Ok(report)
}

/// Discards a group whose rewards are all exactly equal.
pub fn zero_advantage_filter(rewards: &[f64]) -> FilterDecision {
    match rewards.split_first() {
        Some((first, rest)) if rest.iter().all(|r| r == first) => FilterDecision::Discard,
        _ => FilterDecision::Keep,
    }
}

pub fn truncation_filter(t: &Trajectory) -> FilterDecision {
    if t.truncated() {
        FilterDecision::Discard
    } else {
        FilterDecision::Keep
    }
}
