use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "divgen", version, about = "Train, decode and evaluate data-to-text ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an ensemble and write checkpoints, assignment log and report.
    Train(TrainArgs),
    /// Generate text for meaning representations (one per line).
    Generate(GenerateArgs),
    /// Score generated text against a dataset.
    Evaluate(EvaluateArgs),
    /// Summarize an assignment log.
    Assignments(AssignmentArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionArg {
    #[value(name = "32")]
    P32,
    #[value(name = "64")]
    P64,
}

/// Settings shared by every subcommand that loads a run configuration.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
}

#[derive(Args, Debug, Default)]
pub struct DecodeOverrides {
    /// Length penalty strength.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Coverage penalty strength.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Prune hypotheses that open two sentences with the same bigram.
    #[arg(long)]
    pub block_repeats: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Number of epochs (overrides the configured count).
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[command(flatten)]
    pub decode: DecodeOverrides,
    /// Training run directory holding vocab.json and checkpoints.
    #[arg(long)]
    pub run: PathBuf,
    /// Input file with one meaning representation per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Output text file (standard output when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the ranked hypotheses as JSON lines.
    #[arg(long)]
    pub nbest: Option<PathBuf>,
    /// Use this ensemble member instead of selecting by validation perplexity.
    #[arg(long)]
    pub member: Option<usize>,
    /// Validation dataset for member selection (defaults to the configured one).
    #[arg(long)]
    pub valid: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Generated text, one output per grouped example.
    #[arg(long)]
    pub generated: PathBuf,
    /// Dataset CSV with the references.
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory; when given, perplexity on the dataset is reported.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub member: usize,
    /// Write the JSON report here (printed otherwise).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AssignmentArgs {
    /// Assignment log CSV written by `train`.
    #[arg(long)]
    pub log: PathBuf,
    /// Planted labels, one integer per training instance.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Ensemble size (inferred from the log when omitted).
    #[arg(long)]
    pub members: Option<usize>,
}
