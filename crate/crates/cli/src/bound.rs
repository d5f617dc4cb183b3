//! The `bound` subcommand: grammar-file depth-bounding transform.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};

use pcfg_induce::bounding::{bound_grammar, compute_containment, write_bounded_grammar};
use pcfg_induce::grammar::read_grammar;

#[derive(clap::Args)]
pub struct BoundArgs {
    /// Plain grammar file to transform.
    pub grammar: PathBuf,
    /// Left-corner depth bound (≥ 1).
    #[arg(long)]
    pub depth: usize,
    /// Fixed-point iterations for the containment computation.
    #[arg(long, default_value_t = 20)]
    pub containment_iters: usize,
    /// Bounded grammar output file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: BoundArgs) -> Result<()> {
    let file = fs::File::open(&args.grammar)
        .with_context(|| format!("cannot open grammar {}", args.grammar.display()))?;
    let (grammar, _, vocab) = read_grammar::<f64, _>(BufReader::new(file))
        .with_context(|| format!("cannot parse grammar {}", args.grammar.display()))?;
    let containment = compute_containment(&grammar, args.depth, args.containment_iters)?;
    if let Some(warning) = containment.convergence_warning() {
        eprintln!("warning: {warning}");
    }
    let bounded = bound_grammar(&grammar, &containment)?;
    let mut out = fs::File::create(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    write_bounded_grammar(&bounded, &vocab, &mut out)?;
    Ok(())
}
