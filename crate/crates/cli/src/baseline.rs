//! The `baseline` subcommand: right-branching trees for every sentence.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};

use pcfg_induce::treebank::{emit_bracketed, right_branching_tree, Corpus};

#[derive(clap::Args)]
pub struct BaselineArgs {
    /// Corpus file: one sentence per line, whitespace-tokenized.
    pub corpus: PathBuf,
    /// Output file: one right-branching tree per sentence.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: BaselineArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)
        .with_context(|| format!("cannot load corpus {}", args.corpus.display()))?;
    let mut out = BufWriter::new(
        fs::File::create(&args.out)
            .with_context(|| format!("cannot create {}", args.out.display()))?,
    );
    for i in 0..corpus.len() {
        let tree = right_branching_tree(&corpus.tokens(i))?;
        writeln!(out, "{}", emit_bracketed(&tree))?;
    }
    out.flush()?;
    Ok(())
}
