//! The `eval` subcommand: unlabeled PARSEVAL over tree files.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};

use pcfg_induce::eval::{unlabeled_parseval, EvalOptions};
use pcfg_induce::treebank::read_trees;

#[derive(clap::Args)]
pub struct EvalArgs {
    /// Gold treebank: one bracketed tree per line.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predicted trees, aligned with the gold file.
    #[arg(long)]
    pub pred: PathBuf,
    /// Exclude the whole-sentence span from both sides.
    #[arg(long)]
    pub no_root_span: bool,
    /// Write per-sentence tallies to this TSV file.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let gold = read_trees(BufReader::new(
        fs::File::open(&args.gold)
            .with_context(|| format!("cannot open gold file {}", args.gold.display()))?,
    ))?;
    let pred = read_trees(BufReader::new(
        fs::File::open(&args.pred)
            .with_context(|| format!("cannot open predictions {}", args.pred.display()))?,
    ))?;
    let options = EvalOptions {
        include_root_span: !args.no_root_span,
        ..EvalOptions::default()
    };
    let report = unlabeled_parseval(&gold, &pred, &options)?;
    println!("recall\tprecision\tf1");
    println!(
        "{:.4}\t{:.4}\t{:.4}",
        report.recall, report.precision, report.f1
    );
    if let Some(path) = &args.diagnostics {
        let mut out = BufWriter::new(
            fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?,
        );
        writeln!(out, "sentence\tstatus\tmatched\tgoldSpans\tpredictedSpans")?;
        for (i, sent) in report.sentences.iter().enumerate() {
            match sent {
                Some(s) => writeln!(
                    out,
                    "{i}\tscored\t{}\t{}\t{}",
                    s.matched, s.gold_spans, s.predicted_spans
                )?,
                None => writeln!(out, "{i}\tskipped\t0\t0\t0")?,
            }
        }
        out.flush()?;
    }
    Ok(())
}
