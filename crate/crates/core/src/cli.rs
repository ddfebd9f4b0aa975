//! Experiment runner: run files, subcommands and the output directory layout.
//!
//! A run writes `run.csv`, `summary.json`, `policy.ckpt` and
//! `filter_report.json` into its output directory.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::arm::{reward_table, RewardConfig};
use crate::domain::{TrajectoryType, TypeTable};
use crate::dynkl::KlConfig;
use crate::env::{enumerate_trajectories, make_suite, DifficultySpec, TaskSuite};
use crate::error::{Error, Result};
use crate::filter::{offline_filter, FilterReport};
use crate::metrics::{evaluate, write_csv, write_summary_json, EvalMetrics, RunLog};
use crate::policy::TabularPolicy;
use crate::trainer::{TrainConfig, Trainer, TrainerSettings};

pub const RUN_CSV: &str = "run.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const POLICY_CKPT: &str = "policy.ckpt";
pub const FILTER_REPORT_JSON: &str = "filter_report.json";
pub const SWEEP_INDEX_JSON: &str = "sweep.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub queries: usize,
    pub answers: usize,
    pub difficulty: DifficultySpec,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            queries: 50,
            answers: 4,
            difficulty: DifficultySpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub offline: bool,
    pub offline_samples: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            offline: true,
            offline_samples: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub eval_interval: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection { eval_interval: 10 }
    }
}

/// Contents of a JSON run file. Missing sections take their defaults,
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub env: EnvSection,
    pub reward: RewardConfig,
    pub kl: KlConfig,
    pub trainer: TrainerSettings,
    pub filter: FilterSection,
    pub metrics: MetricsSection,
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: RunSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.env.queries < 2 {
            return Err(Error::config("env.queries", "min", format!("need at least 2 queries, got {}", self.env.queries)));
        }
        if self.env.answers < 2 {
            return Err(Error::config("env.answers", "min", format!("need at least 2 answers, got {}", self.env.answers)));
        }
        self.env.difficulty.validate()?;
        if self.filter.offline_samples < 2 {
            return Err(Error::config(
                "filter.offline_samples",
                "min",
                format!("need at least 2 samples per query, got {}", self.filter.offline_samples),
            ));
        }
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            trainer: self.trainer.clone(),
            reward: self.reward,
            kl: self.kl,
            eval_interval: self.metrics.eval_interval,
            seed: self.seed,
        }
    }

    /// Output directory, preferring `--out` over the file's `out`.
    pub fn resolve_out(&self, flag: Option<&Path>) -> Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out.clone())
            .ok_or_else(|| Error::config("out", "required", "no output directory given (use --out or `out`)"))
    }

    pub fn build_suite(&self) -> Result<(TaskSuite, TabularPolicy)> {
        make_suite(self.env.queries, self.env.answers, &self.env.difficulty, self.seed)
    }
}

/// A failure together with the pipeline stage it happened in.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait AtStage<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub runlog: RunLog,
    pub filter_report: Option<FilterReport>,
    pub policy: TabularPolicy,
}

/// Builds the suite, filters it, trains, and returns the results without
/// touching the filesystem.
pub fn execute(spec: &RunSpec) -> StageResult<RunOutput> {
    spec.validate().at("config validation")?;
    let (suite, policy) = spec.build_suite().at("suite construction")?;
    let (train_suite, filter_report) = if spec.filter.offline {
        let report = offline_filter(&policy, &suite, spec.filter.offline_samples, spec.seed).at("offline filter")?;
        (suite.subset(&report.kept), Some(report))
    } else {
        (suite.clone(), None)
    };
    if train_suite.is_empty() {
        return Err(StageError {
            stage: "offline filter",
            error: Error::EmptySuite,
        });
    }
    let mut trainer = Trainer::new(spec.train_config(), train_suite, suite, policy).at("trainer setup")?;
    let mut runlog = trainer.run().at("training")?;
    runlog.config = serde_json::to_value(spec).map_err(Error::from).at("config echo")?;
    Ok(RunOutput {
        runlog,
        filter_report,
        policy: trainer.into_policy(),
    })
}

/// Runs `spec` and writes the output layout into `out`.
pub fn run(spec: &RunSpec, out: &Path) -> StageResult<RunOutput> {
    spec.validate().at("config validation")?;
    let output = execute(spec)?;
    create_dir(out).at("output directory")?;
    write_csv(&output.runlog, &out.join(RUN_CSV)).at("writing run.csv")?;
    write_summary_json(&output.runlog, &out.join(SUMMARY_JSON)).at("writing summary.json")?;
    output
        .policy
        .save_checkpoint(&out.join(POLICY_CKPT), spec.seed)
        .at("writing policy.ckpt")?;
    if let Some(report) = &output.filter_report {
        write_json(report, &out.join(FILTER_REPORT_JSON)).at("writing filter_report.json")?;
    }
    Ok(output)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Theta,
    Lambda,
    LearningRate,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Theta => "reward.theta",
            SweepParam::Lambda => "kl.lambda",
            SweepParam::LearningRate => "trainer.learning_rate",
        }
    }

    pub fn apply(self, spec: &mut RunSpec, value: f64) {
        match self {
            SweepParam::Theta => spec.reward.theta = value,
            SweepParam::Lambda => spec.kl.lambda = value,
            SweepParam::LearningRate => spec.trainer.learning_rate = value,
        }
    }

    fn dir_name(self, value: f64) -> String {
        let name = match self {
            SweepParam::Theta => "theta",
            SweepParam::Lambda => "lambda",
            SweepParam::LearningRate => "learning_rate",
        };
        format!("{name}_{value}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub dir: PathBuf,
    pub final_metrics: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepIndex {
    pub parameter: SweepParam,
    pub key: String,
    pub runs: Vec<SweepEntry>,
}

/// One run per value in `<out>/<param>_<value>/`, plus `<out>/sweep.json`.
/// Every variant is validated before the first run starts.
pub fn sweep(spec: &RunSpec, param: SweepParam, values: &[f64], out: &Path) -> StageResult<SweepIndex> {
    if values.is_empty() {
        return Err(StageError {
            stage: "config validation",
            error: Error::config(param.key(), "non-empty", "sweep needs at least one value"),
        });
    }
    let variants: Vec<RunSpec> = values
        .iter()
        .map(|&v| {
            let mut s = spec.clone();
            param.apply(&mut s, v);
            s.validate().map(|_| s)
        })
        .collect::<Result<_>>()
        .at("config validation")?;
    let mut runs = Vec::with_capacity(values.len());
    for (variant, &value) in variants.iter().zip(values) {
        let dir = out.join(param.dir_name(value));
        let output = run(variant, &dir)?;
        runs.push(SweepEntry {
            value,
            dir,
            final_metrics: output.runlog.final_metrics,
        });
    }
    let index = SweepIndex {
        parameter: param,
        key: param.key().to_string(),
        runs,
    };
    write_json(&index, &out.join(SWEEP_INDEX_JSON)).at("writing sweep.json")?;
    Ok(index)
}

/// Exact quantities of one query from full enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOracle {
    pub query_id: usize,
    /// `1 - pi1(ground truth)`.
    pub p0_star: f64,
    /// Probability of each trajectory type.
    pub type_probs: TypeTable<f64>,
    /// Expected ARM reward with rewards evaluated at the exact `p0_star`.
    pub expected_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub queries: Vec<QueryOracle>,
    /// Suite means of the exact first/second-turn success probabilities.
    pub expected_acc_t1: f64,
    pub expected_acc_t2: f64,
    pub expected_reward: f64,
    /// Greedy accuracies computed from the enumerated argmax trajectory.
    pub greedy: EvalMetrics,
}

pub fn oracle_report(policy: &TabularPolicy, suite: &TaskSuite, reward: &RewardConfig) -> Result<OracleReport> {
    if suite.is_empty() {
        return Err(Error::EmptySuite);
    }
    let mut queries = Vec::with_capacity(suite.len());
    let mut greedy_counts = crate::domain::TypeCounts::default();
    for q in &suite.queries {
        let all = enumerate_trajectories(policy, q)?;
        let mut type_probs = TypeTable::new(0.0, 0.0, 0.0, 0.0);
        let mut best: Option<(f64, TrajectoryType)> = None;
        for (t, p) in &all {
            *type_probs.get_mut(t.ttype) += p;
            if best.is_none_or(|(bp, _)| *p > bp) {
                best = Some((*p, t.ttype));
            }
        }
        let p0_star = 1.0 - (type_probs.one_one + type_probs.one_zero);
        let table = reward_table(p0_star, reward);
        let expected_reward = all.iter().map(|(t, p)| p * table.get(t.ttype)).sum();
        // Greedy rollout picks the argmax of each turn in sequence, which is
        // not in general the most likely pair; follow the same path here.
        let (y1, y2) = policy.greedy_rollout(q)?;
        let greedy_type = all
            .iter()
            .find(|(t, _)| t.turn1.answer == y1 && t.turn2.answer == y2)
            .map(|(t, _)| t.ttype)
            .expect("enumeration covers every pair");
        *greedy_counts.get_mut(greedy_type) += 1;
        queries.push(QueryOracle {
            query_id: q.id,
            p0_star,
            type_probs,
            expected_reward,
        });
    }
    let n = queries.len() as f64;
    let expected_acc_t1 = queries.iter().map(|q| 1.0 - q.p0_star).sum::<f64>() / n;
    let expected_acc_t2 = queries
        .iter()
        .map(|q| q.type_probs.one_one + q.type_probs.zero_one)
        .sum::<f64>()
        / n;
    let expected_reward = queries.iter().map(|q| q.expected_reward).sum::<f64>() / n;
    Ok(OracleReport {
        queries,
        expected_acc_t1,
        expected_acc_t2,
        expected_reward,
        greedy: EvalMetrics::from_counts(greedy_counts)?,
    })
}

#[derive(Debug, Parser)]
#[command(name = "adapo", version, about = "Two-turn self-evaluation RL on tabular policies")]
pub struct Cli {
    /// JSON run file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the run file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides `seed` in the run file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the suite, filter it, train and write the run directory.
    Run,
    /// Repeat a run for several values of one parameter.
    Sweep(SweepArgs),
    /// Run only the offline filter and write its report.
    Filter,
    /// Print exact per-query quantities by enumerating every trajectory.
    Oracle(PolicyArgs),
    /// Greedy metrics of a saved policy on the configured suite.
    Eval(PolicyArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Policy checkpoint; defaults to the initial policy (oracle) or
    /// `<out>/policy.ckpt` (eval).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn load_spec(cli: &Cli) -> StageResult<RunSpec> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("config", "required", "pass --config <path>"))
        .at("config loading")?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e)).at("config loading")?;
    let mut spec: RunSpec = serde_json::from_str(&text).map_err(Error::from).at("config parsing")?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    spec.validate().at("config validation")?;
    Ok(spec)
}

fn load_policy(path: &Path, suite: &TaskSuite) -> Result<TabularPolicy> {
    let (policy, _) = TabularPolicy::load_checkpoint(path)?;
    if policy.queries() != suite.len() || policy.answers() != suite.answers {
        return Err(Error::Shape(format!(
            "checkpoint is {}x{}, suite is {}x{}",
            policy.queries(),
            policy.answers(),
            suite.len(),
            suite.answers
        )));
    }
    Ok(policy)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Dispatches a parsed command line.
pub fn dispatch(cli: &Cli) -> StageResult<()> {
    let spec = load_spec(cli)?;
    let out_flag = cli.out.as_deref();
    match &cli.command {
        Command::Run => {
            let out = spec.resolve_out(out_flag).at("config validation")?;
            let output = run(&spec, &out)?;
            let m = output.runlog.final_metrics;
            println!(
                "wrote {}: acc_t1={:.3} acc_t2={:.3} delta={:+.3}",
                out.display(),
                m.acc_t1,
                m.acc_t2,
                m.delta
            );
        }
        Command::Sweep(args) => {
            let out = spec.resolve_out(out_flag).at("config validation")?;
            let index = sweep(&spec, args.param, &args.values, &out)?;
            for r in &index.runs {
                println!("{}={} -> {}", index.key, r.value, r.dir.display());
            }
        }
        Command::Filter => {
            let out = spec.resolve_out(out_flag).at("config validation")?;
            let (suite, policy) = spec.build_suite().at("suite construction")?;
            let report = offline_filter(&policy, &suite, spec.filter.offline_samples, spec.seed).at("offline filter")?;
            create_dir(&out).at("output directory")?;
            write_json(&report, &out.join(FILTER_REPORT_JSON)).at("writing filter_report.json")?;
            println!(
                "kept {} dropped_easy {} dropped_hard {}",
                report.kept.len(),
                report.dropped_easy.len(),
                report.dropped_hard.len()
            );
        }
        Command::Oracle(args) => {
            let (suite, initial) = spec.build_suite().at("suite construction")?;
            let policy = match &args.checkpoint {
                Some(p) => load_policy(p, &suite).at("checkpoint loading")?,
                None => initial,
            };
            let report = oracle_report(&policy, &suite, &spec.reward).at("oracle")?;
            print_json(&report).at("oracle")?;
        }
        Command::Eval(args) => {
            let (suite, _) = spec.build_suite().at("suite construction")?;
            let path = match &args.checkpoint {
                Some(p) => p.clone(),
                None => spec.resolve_out(out_flag).at("config validation")?.join(POLICY_CKPT),
            };
            let policy = load_policy(&path, &suite).at("checkpoint loading")?;
            let metrics = evaluate(&policy, &suite).at("evaluation")?;
            print_json(&metrics).at("evaluation")?;
        }
    }
    Ok(())
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
