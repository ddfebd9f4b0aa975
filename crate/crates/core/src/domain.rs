//! Shared vocabulary: answers, queries, trajectories and their `i -> j` type.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a discrete answer in `[0, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerId(pub usize);

impl AnswerId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AnswerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: usize,
    pub ground_truth: AnswerId,
}

/// One sampled turn: the answer, its log-probability under the sampling
/// policy, and whether generation hit the length cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub answer: AnswerId,
    pub log_prob: f64,
    #[serde(default)]
    pub truncated: bool,
}

impl TurnResponse {
    pub fn new(answer: AnswerId, log_prob: f64) -> Self {
        TurnResponse {
            answer,
            log_prob,
            truncated: false,
        }
    }
}

/// Correctness transition between the first and the second answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrajectoryType {
    #[serde(rename = "1->1")]
    OneOne,
    #[serde(rename = "1->0")]
    OneZero,
    #[serde(rename = "0->1")]
    ZeroOne,
    #[serde(rename = "0->0")]
    ZeroZero,
}

impl TrajectoryType {
    pub const ALL: [TrajectoryType; 4] = [
        TrajectoryType::OneOne,
        TrajectoryType::OneZero,
        TrajectoryType::ZeroOne,
        TrajectoryType::ZeroZero,
    ];

    pub fn classify(y1_correct: bool, y2_correct: bool) -> Self {
        match (y1_correct, y2_correct) {
            (true, true) => TrajectoryType::OneOne,
            (true, false) => TrajectoryType::OneZero,
            (false, true) => TrajectoryType::ZeroOne,
            (false, false) => TrajectoryType::ZeroZero,
        }
    }

    pub fn first_correct(self) -> bool {
        matches!(self, TrajectoryType::OneOne | TrajectoryType::OneZero)
    }

    pub fn second_correct(self) -> bool {
        matches!(self, TrajectoryType::OneOne | TrajectoryType::ZeroOne)
    }

    pub fn label(self) -> &'static str {
        match self {
            TrajectoryType::OneOne => "1->1",
            TrajectoryType::OneZero => "1->0",
            TrajectoryType::ZeroOne => "0->1",
            TrajectoryType::ZeroZero => "0->0",
        }
    }
}

impl fmt::Display for TrajectoryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Binary correctness `C(y, y*)`.
pub fn verify(answer: AnswerId, ground_truth: AnswerId) -> bool {
    answer == ground_truth
}

/// Free function form of [`TrajectoryType::classify`].
pub fn classify(y1_correct: bool, y2_correct: bool) -> TrajectoryType {
    TrajectoryType::classify(y1_correct, y2_correct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub query_id: usize,
    pub turn1: TurnResponse,
    pub turn2: TurnResponse,
    pub ttype: TrajectoryType,
}

impl Trajectory {
    /// Builds a trajectory, classifying it against `query`'s ground truth.
    pub fn new(query: &Query, turn1: TurnResponse, turn2: TurnResponse) -> Self {
        let ttype = TrajectoryType::classify(
            verify(turn1.answer, query.ground_truth),
            verify(turn2.answer, query.ground_truth),
        );
        Trajectory {
            query_id: query.id,
            turn1,
            turn2,
            ttype,
        }
    }

    pub fn log_prob(&self) -> f64 {
        self.turn1.log_prob + self.turn2.log_prob
    }

    pub fn truncated(&self) -> bool {
        self.turn1.truncated || self.turn2.truncated
    }
}

/// A value for each of the four trajectory types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeTable<T> {
    #[serde(rename = "1->1")]
    pub one_one: T,
    #[serde(rename = "1->0")]
    pub one_zero: T,
    #[serde(rename = "0->1")]
    pub zero_one: T,
    #[serde(rename = "0->0")]
    pub zero_zero: T,
}

impl<T: Copy> TypeTable<T> {
    pub fn new(one_one: T, one_zero: T, zero_one: T, zero_zero: T) -> Self {
        TypeTable {
            one_one,
            one_zero,
            zero_one,
            zero_zero,
        }
    }

    pub fn get(&self, t: TrajectoryType) -> T {
        match t {
            TrajectoryType::OneOne => self.one_one,
            TrajectoryType::OneZero => self.one_zero,
            TrajectoryType::ZeroOne => self.zero_one,
            TrajectoryType::ZeroZero => self.zero_zero,
        }
    }

    pub fn get_mut(&mut self, t: TrajectoryType) -> &mut T {
        match t {
            TrajectoryType::OneOne => &mut self.one_one,
            TrajectoryType::OneZero => &mut self.one_zero,
            TrajectoryType::ZeroOne => &mut self.zero_one,
            TrajectoryType::ZeroZero => &mut self.zero_zero,
        }
    }
}

pub type TypeCounts = TypeTable<usize>;

impl TypeCounts {
    pub fn from_types(types: impl IntoIterator<Item = TrajectoryType>) -> Self {
        let mut counts = TypeCounts::default();
        for t in types {
            *counts.get_mut(t) += 1;
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.one_one + self.one_zero + self.zero_one + self.zero_zero
    }

    pub fn add(&mut self, other: &TypeCounts) {
        for t in TrajectoryType::ALL {
            *self.get_mut(t) += other.get(t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(true, true), TrajectoryType::OneOne);
        assert_eq!(classify(true, false), TrajectoryType::OneZero);
        assert_eq!(classify(false, true), TrajectoryType::ZeroOne);
        assert_eq!(classify(false, false), TrajectoryType::ZeroZero);
    }

    #[test]
    fn classify_is_bijective() {
        let mut seen = std::collections::BTreeSet::new();
        for a in [false, true] {
            for b in [false, true] {
                let t = classify(a, b);
                assert_eq!((t.first_correct(), t.second_correct()), (a, b));
                seen.insert(t);
            }
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn verify_examples() {
        assert!(verify(AnswerId(2), AnswerId(2)));
        assert!(!verify(AnswerId(1), AnswerId(2)));
        assert!(verify(AnswerId(0), AnswerId(0)));
    }

    #[test]
    fn trajectory_type_follows_verifier() {
        let q = Query {
            id: 3,
            ground_truth: AnswerId(1),
        };
        let t = Trajectory::new(
            &q,
            TurnResponse::new(AnswerId(0), -0.5),
            TurnResponse::new(AnswerId(1), -0.1),
        );
        assert_eq!(t.ttype, TrajectoryType::ZeroOne);
        assert!(!t.truncated());
    }

    #[test]
    fn type_table_serializes_with_arrow_keys() {
        let table = TypeTable::new(1.0, -1.0, 2.0, -1.0);
        let json = serde_json::to_string(&table).unwrap();
        assert_eq!(json, r#"{"1->1":1.0,"1->0":-1.0,"0->1":2.0,"0->0":-1.0}"#);
        let back: TypeTable<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }
}
