//! `styledecomp` command-line tool: synthetic data, training, transfer and
//! evaluation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "styledecomp", version, about = "Style transfer experiments with disentangled latents")]
struct Cli {
    /// Seed for the corpus (synth), training runs (train) or probe (eval).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/eval corpus.
    Synth(SynthArgs),
    /// Train one or more runs of a model variant.
    Train(TrainArgs),
    /// Rewrite sentences with the opposite style.
    Transfer(TransferArgs),
    /// Measure trained checkpoints on a labeled corpus.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Training sentences.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Evaluation sentences.
    #[arg(long, default_value_t = 500)]
    pub n_eval: usize,
    #[arg(long, default_value_t = 0.1)]
    pub entanglement: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// `key = value` experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Corpus text file (labels read from `--labels`).
    #[arg(long, requires = "labels")]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub labels: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One sentence per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Source style per line; inferred from style markers when absent.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Corpus text file.
    #[arg(long)]
    pub data: PathBuf,
    /// Label file; defaults to the data path with a `.labels` extension.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Reference file; defaults to the data path with a `.refs` extension.
    /// BLEU is reported as null when it does not exist.
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Output directory; files go to its `eval` subdirectory.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = commands::Log { quiet: cli.quiet };
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a, cli.seed, &log),
        Command::Train(a) => commands::train(a, cli.seed, &log),
        Command::Transfer(a) => commands::transfer(a, &log),
        Command::Eval(a) => commands::eval(a, cli.seed, &log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
