use std::net::SocketAddr;
use std::path::PathBuf;

use anncur_core::corpus::InputFormat;
use anncur_core::simulate::{Estimator, EvalSplit};
use anncur_core::{HeuristicKind, RegressorKind, RegressorSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "anncur",
    version,
    about = "Annotation curricula: difficulty estimators, simulated annotation, and live studies",
    after_help = "Global: --config FILE reads default flags from a TOML file with one [subcommand] table."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the training split and score estimates on held-out times.
    EvalStatic(EvalStaticArgs),
    /// Replay the adaptive annotation loop with recorded times as the annotator.
    Simulate(SimulateArgs),
    /// Leave-one-annotator-out error analysis.
    LooUsers(LooArgs),
    /// Generate a synthetic timed corpus whose times grow with length.
    GenSynthetic(GenArgs),
    /// Write a precomputed curriculum (rank, id, score) as jsonl.
    Order(OrderArgs),
    /// Group comparison report for a study export.
    Analyze(AnalyzeArgs),
    /// Run the annotation study service.
    Serve(ServeArgs),
    /// Evaluate the regressor grid over one or more feature files.
    Tune(TuneArgs),
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse()
}

fn parse_regressor(s: &str) -> Result<RegressorKind, String> {
    s.parse::<RegressorKind>().map_err(|_| format!("'{s}' is not an adaptive estimator (expected ridge, gp, gbm)"))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Jsonl,
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitName {
    Dev,
    Test,
}

impl From<SplitName> for EvalSplit {
    fn from(s: SplitName) -> Self {
        match s {
            SplitName::Dev => EvalSplit::Dev,
            SplitName::Test => EvalSplit::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Timed corpus (jsonl or tsv).
    #[arg(long)]
    pub data: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Keep only this annotator's records.
    #[arg(long)]
    pub annotator: Option<String>,
}

impl DataArgs {
    pub fn format(&self) -> InputFormat {
        match self.format {
            Some(Format::Jsonl) => InputFormat::Jsonl,
            Some(Format::Tsv) => InputFormat::Tsv,
            None => InputFormat::from_path(&self.data),
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Split file (`{"split", "id"}` jsonl). Without it a seeded split is made.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Split fractions when no split file is given: train,test or train,dev,test.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.15,0.15")]
    pub fractions: Vec<f64>,
    /// Held-out split to evaluate on.
    #[arg(long, value_enum)]
    pub eval_on: Option<SplitName>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Feature vectors (`{"id", "vector"}` jsonl).
    #[arg(long, conflicts_with = "bow_dim")]
    pub features: Option<PathBuf>,
    /// Use hashed bag-of-words features of this width instead of a file.
    #[arg(long)]
    pub bow_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Ridge regularization strength.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// GP dot-product kernel variance.
    #[arg(long, default_value_t = 1.0)]
    pub gp_sigma0: f64,
    /// GP white-noise variance.
    #[arg(long, default_value_t = 1.0)]
    pub gp_noise: f64,
    /// Boosting rounds.
    #[arg(long, default_value_t = 100)]
    pub gbm_trees: usize,
    /// Boosting learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub gbm_lr: f64,
    /// Boosted tree depth.
    #[arg(long, default_value_t = 3)]
    pub gbm_depth: usize,
}

impl ModelArgs {
    pub fn spec(&self, kind: RegressorKind) -> RegressorSpec {
        RegressorSpec {
            kind,
            ridge_alpha: self.alpha,
            gp_sigma0_sq: self.gp_sigma0,
            gp_noise_sq: self.gp_noise,
            gbm_n_trees: self.gbm_trees,
            gbm_learning_rate: self.gbm_lr,
            gbm_max_depth: self.gbm_depth,
            ..RegressorSpec::new(kind)
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalStaticArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// sen, fk, external, ridge, gp or gbm.
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Estimator,
    /// Precomputed scores (`{"id", "score"}` jsonl) for the external estimator.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Seed for the split when no split file is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the result as json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// ridge, gp or gbm.
    #[arg(long, value_parser = parse_regressor)]
    pub estimator: RegressorKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Retrain after this many new observations.
    #[arg(long, default_value_t = 1)]
    pub retrain_every: usize,
    /// Evaluate the held-out split every this many iterations.
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    /// First run seed; also seeds the split when no split file is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of runs, with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Worker threads for parallel runs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Learning curves as jsonl, one line per run and iteration.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LooArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// ridge, gp or gbm.
    #[arg(long, value_parser = parse_regressor)]
    pub estimator: RegressorKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Write per-annotator results as json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of instances.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Intercept of time in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub beta0: f64,
    /// Seconds per token.
    #[arg(long, default_value_t = 0.1)]
    pub beta1: f64,
    /// Standard deviation of Gaussian time noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 5)]
    pub min_tokens: usize,
    #[arg(long, default_value_t = 300)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 400)]
    pub vocab_size: usize,
    /// Corpus output (jsonl).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a seeded split here.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
    /// Fractions for --split-out.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.2")]
    pub fractions: Vec<f64>,
    /// Also write hashed bag-of-words features here.
    #[arg(long)]
    pub features_out: Option<PathBuf>,
    /// Width of the --features-out vectors.
    #[arg(long, default_value_t = 128)]
    pub bow_dim: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderStrategy {
    Random,
    Sen,
    Fk,
    External,
    Gold,
}

impl OrderStrategy {
    pub fn heuristic(self) -> Option<HeuristicKind> {
        match self {
            OrderStrategy::Sen => Some(HeuristicKind::Sen),
            OrderStrategy::Fk => Some(HeuristicKind::Fk),
            OrderStrategy::External => Some(HeuristicKind::External),
            OrderStrategy::Random | OrderStrategy::Gold => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub strategy: OrderStrategy,
    /// Precomputed scores for the external strategy.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Curriculum output (jsonl); standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Study export (jsonl).
    #[arg(long)]
    pub export: PathBuf,
    /// Cap times above mean + k * sd.
    #[arg(long, default_value_t = 5.0)]
    pub cap_k: f64,
    /// Times above this many seconds are left out of the cap estimate.
    #[arg(long, default_value_t = 600.0)]
    pub hard_limit: f64,
    /// Emit json instead of text.
    #[arg(long)]
    pub json: bool,
    /// Report output; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory of study logs; nothing is persisted without it.
    #[arg(long, env = "AC_LOG_DIR")]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Feature file; repeat to compare feature sets.
    #[arg(long, required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Results as jsonl, one line per model and feature file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
