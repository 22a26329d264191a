mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Build machine-reading corpora from Wikipedia dumps, convert downstream
/// tasks, and train and evaluate a span-extraction reader.
#[derive(Debug, Parser)]
#[command(name = "wikimrc", version)]
pub struct Cli {
    /// JSON config with flat dotted keys; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse dumps into articles.jsonl and redirects.jsonl.
    BuildCorpus(BuildCorpus),
    /// Build and filter the entity index.
    Index(IndexCmd),
    /// Generate pre-training examples.
    GenPretrain(GenPretrain),
    /// Convert a downstream dataset to reader inputs.
    ConvertTask(ConvertTask),
    /// Train a reader from scratch on generated examples.
    Pretrain(TrainArgs),
    /// Continue training a checkpoint on converted task data.
    Finetune(Finetune),
    /// Score predictions (or a checkpoint) against gold data.
    Evaluate(Evaluate),
    /// Explain a sentence-pair label with a context span.
    Rationale(RationaleCmd),
    /// Entity and example counts per language.
    Stats(Stats),
}

#[derive(Debug, Args)]
pub struct BuildCorpus {
    /// A dump to read, as LANG=PATH; repeatable.
    #[arg(long = "dump", value_name = "LANG=PATH", required_unless_present = "synthetic")]
    pub dumps: Vec<String>,
    /// Use the bundled two-language synthetic dump instead.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexCmd {
    /// Directory written by build-corpus.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Output file; defaults to DIR/index.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Minimum mentions for languages without their own threshold.
    #[arg(long, default_value_t = 5)]
    pub min_count_default: usize,
    /// Per-language minimum, as LANG=N; repeatable. English defaults to 10.
    #[arg(long = "min-count", value_name = "LANG=N")]
    pub min_count: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GenPretrain {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Index file; defaults to DIR/index.jsonl.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Query length in words.
    #[arg(long = "Q", value_name = "WORDS")]
    pub query_words: Option<usize>,
    /// Context length in words.
    #[arg(long = "C", value_name = "WORDS")]
    pub context_words: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Examples per entity and side, as N or ANSWERABLE,UNANSWERABLE.
    #[arg(long)]
    pub caps: Option<String>,
    /// Comma-separated languages to generate for.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Write in canonical (language, entity, ordinal) order.
    #[arg(long)]
    pub sorted: bool,
    /// Generation threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ConvertTask {
    /// eqa, ner, absa or pair.
    #[arg(long)]
    pub task: String,
    /// Scheme file, or one of the bundled names conll, absa, pawsx, xnli, eqa.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Native instances, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pair conversion: classification or rationale.
    #[arg(long, default_value = "classification")]
    pub mode: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training examples in mrc.jsonl form.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss as CSV.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    /// Longest assembled input.
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Finetune {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Checkpoint to start from.
    #[arg(long)]
    pub init: PathBuf,
    /// Dataset settings from the config (query length, input length, batch
    /// size, learning rate, epochs).
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the preset; ignored when --steps is given.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    /// eqa, ner, absa or pair; how gold lines without a "task" field are read.
    #[arg(long)]
    pub task: String,
    /// Gold instances as DATASET=PATH; repeatable.
    #[arg(long = "gold", value_name = "DATASET=PATH", required = true)]
    pub gold: Vec<String>,
    /// Predictions as DATASET=PATH; repeatable.
    #[arg(long = "predictions", value_name = "DATASET=PATH", conflicts_with = "checkpoint")]
    pub predictions: Vec<String>,
    /// Predict with this checkpoint instead of reading predictions.
    #[arg(long, required_unless_present = "predictions")]
    pub checkpoint: Option<PathBuf>,
    /// Scheme used with --checkpoint.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Dataset settings whose query length applies with --checkpoint.
    #[arg(long)]
    pub preset: Option<String>,
    /// Directory for predictions made with --checkpoint.
    #[arg(long)]
    pub write_predictions: Option<PathBuf>,
    /// Machine-readable rows as JSON lines.
    #[arg(long)]
    pub rows: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RationaleCmd {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Pair scheme; defaults to the bundled XNLI scheme.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub sen1: String,
    #[arg(long)]
    pub sen2: String,
    #[arg(long)]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct Stats {
    /// Examples in mrc.jsonl form.
    #[arg(long)]
    pub data: PathBuf,
    /// Print machine-readable rows instead of the table.
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
