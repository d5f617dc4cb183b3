//! Command-line front end for the grammar induction library.

use anyhow::Result;
use clap::{Parser, Subcommand};

mod analyze;
mod baseline;
mod bound;
mod eval_cmd;
mod induce;
mod pioc_cmd;

#[derive(Parser)]
#[command(
    name = "pcfg-induce",
    version,
    about = "Learn binary PCFGs from raw text by Gibbs sampling, with optional \
             left-corner depth bounding, posterior-based decoding, and unlabeled \
             PARSEVAL scoring."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run grammar induction on a corpus, writing samples, a likelihood
    /// trace, checkpoints, and a manifest into a run directory.
    Induce(induce::InduceArgs),
    /// Transform a grammar file into its depth-bounded form.
    Bound(bound::BoundArgs),
    /// Decode one tree per sentence from posterior samples.
    Pioc(pioc_cmd::PiocArgs),
    /// Score predicted trees against a gold treebank (unlabeled PARSEVAL).
    Eval(eval_cmd::EvalArgs),
    /// Write right-branching baseline trees for a corpus.
    Baseline(baseline::BaselineArgs),
    /// Summarize runs: final likelihoods, accuracy, depth usage.
    Analyze(analyze::AnalyzeArgs),
}

fn main() {
    let cli = Cli::parse();
    let result: Result<()> = match cli.command {
        Command::Induce(args) => induce::run(args),
        Command::Bound(args) => bound::run(args),
        Command::Pioc(args) => pioc_cmd::run(args),
        Command::Eval(args) => eval_cmd::run(args),
        Command::Baseline(args) => baseline::run(args),
        Command::Analyze(args) => analyze::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
