//! The `pioc` subcommand: pool samples across files and runs, decode one
//! tree per sentence.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use pcfg_induce::pioc::{map_decode, merge_uncertain_spans, SpanStats};
use pcfg_induce::treebank::{emit_bracketed, read_trees, Corpus, Tree};

#[derive(clap::Args)]
pub struct PiocArgs {
    /// Corpus the samples were drawn from (supplies the words).
    pub corpus: PathBuf,
    /// Sample files; glob patterns are expanded (quote them to bypass
    /// the shell). Files may come from different runs.
    #[arg(long, required = true, num_args = 1..)]
    pub samples: Vec<String>,
    /// Flatten 3–4 word constituents whose top two split posteriors are
    /// closer than this; 0 disables flattening.
    #[arg(long, default_value_t = 0.3)]
    pub merge_threshold: f64,
    /// Output file: one decoded tree per corpus sentence.
    #[arg(long)]
    pub out: PathBuf,
}

/// Expands glob patterns to a sorted, deduplicated file list.
pub fn expand_sample_args(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for pattern in patterns {
        let before = files.len();
        for entry in glob::glob(pattern)
            .with_context(|| format!("bad sample pattern {pattern:?}"))?
        {
            files.push(entry?);
        }
        if files.len() == before {
            bail!("no sample files match {pattern:?}");
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Reads sample files into per-sentence tree lists, validating that every
/// file covers the corpus exactly.
pub fn pool_samples(corpus: &Corpus, files: &[PathBuf]) -> Result<Vec<Vec<Tree>>> {
    let mut per_sentence: Vec<Vec<Tree>> = vec![Vec::new(); corpus.len()];
    for path in files {
        let file = fs::File::open(path)
            .with_context(|| format!("cannot open sample file {}", path.display()))?;
        let trees = read_trees(std::io::BufReader::new(file))
            .with_context(|| format!("cannot parse sample file {}", path.display()))?;
        if trees.len() != corpus.len() {
            bail!(
                "{}: {} trees for a corpus of {} sentences",
                path.display(),
                trees.len(),
                corpus.len()
            );
        }
        for (i, tree) in trees.into_iter().enumerate() {
            if tree.leaves() != corpus.tokens(i) {
                bail!(
                    "{}: sentence {i} yield does not match the corpus",
                    path.display()
                );
            }
            per_sentence[i].push(tree);
        }
    }
    Ok(per_sentence)
}

pub fn decode_corpus(
    corpus: &Corpus,
    per_sentence: &[Vec<Tree>],
    merge_threshold: f64,
) -> Result<Vec<Tree>> {
    (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let stats = SpanStats::from_trees(&per_sentence[i])
                .with_context(|| format!("sentence {i}"))?;
            let words = corpus.tokens(i);
            let tree = map_decode(&stats, &words)?;
            Ok(merge_uncertain_spans(&tree, &stats, merge_threshold))
        })
        .collect()
}

pub fn run(args: PiocArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)
        .with_context(|| format!("cannot load corpus {}", args.corpus.display()))?;
    let files = expand_sample_args(&args.samples)?;
    let per_sentence = pool_samples(&corpus, &files)?;
    let decoded = decode_corpus(&corpus, &per_sentence, args.merge_threshold)?;
    let mut out = BufWriter::new(
        fs::File::create(&args.out)
            .with_context(|| format!("cannot create {}", args.out.display()))?,
    );
    for tree in &decoded {
        writeln!(out, "{}", emit_bracketed(tree))?;
    }
    out.flush()?;
    Ok(())
}
