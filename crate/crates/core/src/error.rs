use std::path::PathBuf;

/// Errors produced anywhere in the lab.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a constraint. `key` is the dotted path
    /// of the offending setting, `constraint` a short stable name.
    #[error("invalid config `{key}` ({constraint}): {message}")]
    Config {
        key: String,
        constraint: String,
        message: String,
    },

    #[error("cannot estimate proficiency from an empty group")]
    EmptyGroup,

    #[error("group of {0} rewards is too small, need at least 2")]
    GroupTooSmall(usize),

    #[error("zero-variance reward group reached the optimizer")]
    ZeroVarianceGroup,

    #[error("distribution support mismatch: {left} vs {right} atoms")]
    SupportMismatch { left: usize, right: usize },

    #[error("unknown query {id} (policy has {count} queries)")]
    UnknownQuery { id: usize, count: usize },

    #[error("answer {answer} outside vocabulary of size {vocab}")]
    InvalidAnswer { answer: usize, vocab: usize },

    #[error("could not reach greedy accuracy band [{lo}, {hi}] after {retries} retries (last {last})")]
    UnreachableTarget {
        lo: f64,
        hi: f64,
        retries: usize,
        last: f64,
    },

    #[error("every group was filtered for {0} consecutive iterations")]
    StarvedBatch(usize),

    #[error("invalid SCoRe stage {0}, expected 1 or 2")]
    InvalidStage(u8),

    #[error("cannot evaluate an empty suite")]
    EmptySuite,

    #[error("enumeration infeasible for vocabulary size {vocab} (limit {limit})")]
    Feasibility { vocab: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(
        key: impl Into<String>,
        constraint: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Config {
            key: key.into(),
            constraint: constraint.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
