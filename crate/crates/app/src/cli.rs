use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "modq", version, about = "Rule-sensitive moderation: harvest, build, train, evaluate and serve")]
pub struct Cli {
    /// TOML file overriding built-in defaults; flags override the file.
    #[arg(long, global = true, env = "MODQ_CONFIG")]
    pub config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover instances and collect moderated and safe comments.
    Harvest(HarvestArgs),
    /// Turn harvested records (or a NormVio export) into dataset rows.
    BuildDataset(BuildArgs),
    /// Split dataset rows into train/dev/test and the two holdouts.
    Split(SplitArgs),
    /// Train a model or fit a baseline bank.
    Train(TrainArgs),
    /// Score a model or an external prediction file against gold rows.
    Evaluate(EvaluateArgs),
    /// Write per-row predictions.
    Predict(PredictArgs),
    /// Run the HTTP inference service.
    Serve(ServeArgs),
    /// Generalization report over a split directory (CSV, PNG, JSON).
    Report(ReportArgs),
    /// Generate the synthetic benchmark corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    /// One host per line; `#` starts a comment.
    #[arg(long, required_unless_present = "mock")]
    pub seeds: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Requests per second per instance.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub fan_out: Option<usize>,
    #[arg(long)]
    pub safe_seed: Option<u64>,
    /// Harvest from the bundled mock federation instead of the network.
    #[arg(long)]
    pub mock: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Records from `harvest` (JSON lines).
    #[arg(long, conflicts_with = "normvio", required_unless_present = "normvio")]
    pub records: Option<PathBuf>,
    /// A NormVio export (JSON lines or CSV).
    #[arg(long)]
    pub normvio: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// `list` or `remote`.
    #[arg(long)]
    pub extractor: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub holdout_communities: Option<usize>,
    #[arg(long)]
    pub holdout_rules: Option<usize>,
    /// Hold out these communities instead of drawing them (repeatable).
    #[arg(long = "holdout-community")]
    pub holdout_community: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Select,
    Extract,
    Random,
    Cnb,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelChoice,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Augmented copies per extract example.
    #[arg(long)]
    pub copies: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// External predictions: `{record_id, predicted_rule_number}` or
    /// `{record_id, predicted_categories}` per line.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MODQ_ADDR")]
    pub addr: Option<String>,
    /// Serve every model found directly under this directory.
    #[arg(long, env = "MODQ_MODEL_DIR")]
    pub model_dir: Option<PathBuf>,
    /// `ID=PATH`, repeatable.
    #[arg(long = "model")]
    pub models: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `split`.
    #[arg(long)]
    pub splits: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub comments: Option<usize>,
}
