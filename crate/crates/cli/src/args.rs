use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowgnn_core::analysis::TaskId;
use flowgnn_model::MaskMode;

#[derive(Debug, Parser)]
#[command(
    name = "flowgnn",
    version,
    about = "Program graphs, data-flow oracles and a gated GNN"
)]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Repeat for more log output on standard error.
    #[arg(short, long = "verbose", global = true, action = clap::ArgAction::Count)]
    pub verbosity: u8,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    /// Score only vertices of the task's target kind.
    Kind,
    /// Score every vertex.
    All,
}

impl From<MaskArg> for MaskMode {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::Kind => MaskMode::Kind,
            MaskArg::All => MaskMode::All,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate IR files; exit 0 only if all are clean.
    Parse {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Write random well-formed IR programs as `<prefix>NNNNN.ll`.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value = "p")]
        prefix: String,
        #[arg(long, default_value_t = 3)]
        max_functions: usize,
        #[arg(long, default_value_t = 30)]
        max_instructions: usize,
    },
    /// Build program graphs into `<out>/<name>.graphs.jsonl`.
    Graph {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Also write one DOT file per graph.
        #[arg(long)]
        dot: bool,
        #[arg(long, default_value = "corpus")]
        name: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run one oracle and print its labels and step count.
    Analyze {
        #[arg(long)]
        task: TaskId,
        #[arg(long)]
        root: u32,
        /// Graph file; `--source-id` picks a graph when it holds several.
        graph: PathBuf,
        #[arg(long)]
        source_id: Option<String>,
    },
    /// Label, filter to DDF-N, split 3:1:1 and write example files.
    Dataset {
        #[arg(long)]
        task: TaskId,
        /// Keep examples whose step count is at most this.
        #[arg(long)]
        ddf_steps: u32,
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write gzip-compressed files.
        #[arg(long)]
        gzip: bool,
    },
    /// Derive a vocabulary from training graphs, or measure its coverage.
    #[command(args_conflicts_with_subcommands = true)]
    Vocab(VocabArgs),
    /// Train a model from a JSON run config.
    Train {
        #[arg(long)]
        task: TaskId,
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint and print precision, recall and F1.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        graphs: Vec<PathBuf>,
        #[arg(long)]
        vocab: PathBuf,
        /// Propagation rounds at inference.
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = MaskArg::Kind)]
        mask: MaskArg,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run gradient checks; exit 3 if any exceeds the tolerance.
    Gradcheck {
        /// Check the full model instead of the primitives.
        #[arg(long)]
        full_model: bool,
        #[arg(long, default_value_t = 20)]
        batches: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Re-run the invocation recorded in a config echo file.
    Replay { echo: PathBuf },
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[command(subcommand)]
    pub action: Option<VocabAction>,
    /// Training graph files.
    #[arg(long, num_args = 1..)]
    pub train: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VocabAction {
    /// Fraction of test vertices whose key is in the vocabulary.
    Coverage {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        test: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Synth { .. } => "synth",
            Command::Graph { .. } => "graph",
            Command::Analyze { .. } => "analyze",
            Command::Dataset { .. } => "dataset",
            Command::Vocab(_) => "vocab",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Gradcheck { .. } => "gradcheck",
            Command::Replay { .. } => "replay",
        }
    }
}
