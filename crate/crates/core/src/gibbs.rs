//! The alternating Gibbs sampler over grammars and parse trees.
//!
//! Each iteration draws a grammar from the Dirichlet posterior given the
//! current trees' rule counts, optionally reweights it into its
//! depth-bounded form, then redraws every sentence's tree from the exact
//! conditional posterior. Log likelihoods are traced per iteration, tree
//! sets are emitted on a configurable schedule after burn-in, and
//! checkpoints make interrupted runs resumable bit-for-bit.

use std::fs;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounding::{bound_grammar, child_positions, compute_containment, Position};
use crate::chart::{build_inside_chart, sample_tree, BuildPath, ChartGrammar};
use crate::error::{Error, Result};
use crate::grammar::{
    parse_category_token, sample_posterior_grammar, write_grammar, CategorySet, CountMatrix,
    Grammar, Vocabulary,
};
use crate::num::Real;
use crate::rng;
use crate::treebank::{emit_bracketed, left_corner_depth, parse_bracketed, Corpus, Tree};

/// Everything that defines a run. `max_depth: None` means unbounded
/// induction; `workers: 0` means use the ambient thread pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub max_depth: Option<usize>,
    pub categories: usize,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub sample_every: usize,
    pub seed: u64,
    pub containment_iters: usize,
    pub workers: usize,
}

impl RunConfig {
    /// A config with the documented default schedule: 700 iterations,
    /// burn-in 500, a tree-set emission every 2nd iteration afterwards
    /// (100 emissions), β = 0.2, 20 containment iterations.
    pub fn new(categories: usize) -> RunConfig {
        RunConfig {
            max_depth: None,
            categories,
            beta: 0.2,
            iterations: 700,
            burn_in: 500,
            sample_every: 2,
            seed: 0,
            containment_iters: 20,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories == 0 {
            return Err(Error::param("need at least one category"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta must be positive and finite"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::param(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::param("sample-every must be at least 1"));
        }
        if let Some(d) = self.max_depth {
            if d == 0 {
                return Err(Error::param("depth bound must be at least 1"));
            }
        }
        if self.containment_iters == 0 {
            return Err(Error::param("containment needs at least one iteration"));
        }
        Ok(())
    }
}

/// The sampler's full state after an iteration.
#[derive(Clone, Debug)]
pub struct SamplerState<F> {
    pub iteration: usize,
    pub grammar: Grammar<F>,
    pub trees: Vec<Tree>,
    pub corpus_log_lik: F,
}

/// How to count rule applications.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    Plain,
    Bounded(usize),
}

/// Tallies rule applications over a tree set into a plain-category count
/// matrix. Node labels may be plain (`c3`) or position-annotated
/// (`c3@L2`); positions are not read from labels — in bounded mode they
/// are derived structurally from the root down and the per-position tally
/// is projected back to plain categories, which also verifies that no
/// tree exceeds the bound.
pub fn count_rules<F: Real>(
    trees: &[Tree],
    mode: CountMode,
    categories: usize,
    vocab: &Vocabulary,
) -> Result<CountMatrix<F>> {
    let cats = CategorySet::new(categories)?;
    let mut counts = CountMatrix::zeros(categories, vocab.len());
    match mode {
        CountMode::Plain => {
            for tree in trees {
                tally(tree, None, &cats, vocab, &mut counts)?;
            }
        }
        CountMode::Bounded(d) => {
            if d == 0 {
                return Err(Error::param("depth bound must be at least 1"));
            }
            let mut bounded = crate::bounding::PositionCounts::new(categories, vocab.len());
            for tree in trees {
                tally_bounded(tree, Position::ROOT, d, &cats, vocab, &mut bounded)?;
            }
            counts = crate::bounding::project_counts(&bounded);
        }
    }
    Ok(counts)
}

/// Category index from a chart label, ignoring any `@<position>` suffix.
fn label_category(label: &str, cats: &CategorySet) -> Result<usize> {
    let head = label.split_once('@').map_or(label, |(h, _)| h);
    parse_category_token(head)
        .filter(|&i| i < cats.count())
        .ok_or_else(|| Error::data(format!("node label {label:?} is not a known category")))
}

fn word_id(token: &str, vocab: &Vocabulary) -> Result<usize> {
    vocab
        .id(token)
        .ok_or_else(|| Error::data(format!("leaf {token:?} is not in the vocabulary")))
}

enum Expansion {
    Terminal(usize),
    Binary(usize, usize),
}

fn expansion(tree: &Tree, cats: &CategorySet, vocab: &Vocabulary) -> Result<(usize, Expansion)> {
    let Tree::Node { label, children } = tree else {
        return Err(Error::data("a bare leaf is not a rule application"));
    };
    let parent = label_category(label, cats)?;
    match children.as_slice() {
        [Tree::Leaf(w)] => Ok((parent, Expansion::Terminal(word_id(w, vocab)?))),
        [l, r] if !l.is_leaf() && !r.is_leaf() => Ok((
            parent,
            Expansion::Binary(label_category(l.label(), cats)?, label_category(r.label(), cats)?),
        )),
        _ => Err(Error::data(format!(
            "node {label:?} is neither a preterminal nor binary"
        ))),
    }
}

fn tally<F: Real>(
    tree: &Tree,
    _pos: Option<Position>,
    cats: &CategorySet,
    vocab: &Vocabulary,
    counts: &mut CountMatrix<F>,
) -> Result<()> {
    let (parent, exp) = expansion(tree, cats, vocab)?;
    match exp {
        Expansion::Terminal(w) => counts.add_terminal(parent, w, F::one()),
        Expansion::Binary(a, b) => {
            counts.add_binary(parent, a, b, F::one());
            tally(&tree.children()[0], None, cats, vocab, counts)?;
            tally(&tree.children()[1], None, cats, vocab, counts)?;
        }
    }
    Ok(())
}

fn tally_bounded<F: Real>(
    tree: &Tree,
    pos: Position,
    max_depth: usize,
    cats: &CategorySet,
    vocab: &Vocabulary,
    counts: &mut crate::bounding::PositionCounts<F>,
) -> Result<()> {
    let (parent, exp) = expansion(tree, cats, vocab)?;
    match exp {
        Expansion::Terminal(w) => counts.add_terminal(pos, parent, w, F::one()),
        Expansion::Binary(a, b) => {
            let (pl, pr) = child_positions(pos);
            if !pl.is_valid(max_depth) || !pr.is_valid(max_depth) {
                return Err(Error::data(format!(
                    "tree exceeds the depth bound {max_depth}: binary node at {pos}"
                )));
            }
            counts.add_binary(pos, parent, a, b, F::one());
            tally_bounded(&tree.children()[0], pl, max_depth, cats, vocab, counts)?;
            tally_bounded(&tree.children()[1], pr, max_depth, cats, vocab, counts)?;
        }
    }
    Ok(())
}

/// Where a run reports its progress. `on_iteration` sees every iteration
/// (including iteration 0); sample emission and checkpoint cadence are the
/// run's decisions, the sink only stores what it is handed.
pub trait RunSink<F: Real> {
    fn on_iteration(&mut self, state: &SamplerState<F>) -> Result<()>;
    fn emit_samples(&mut self, iteration: usize, trees: &[Tree]) -> Result<()>;
    /// Whether a checkpoint should be built and written after `iteration`.
    fn checkpoint_wanted(&self, _iteration: usize, _is_last: bool) -> bool {
        false
    }
    fn write_checkpoint(&mut self, _checkpoint: &Checkpoint) -> Result<()> {
        Ok(())
    }
    fn on_warning(&mut self, _iteration: usize, _message: &str) {}
}

/// Versioned first line of every checkpoint file.
pub const CHECKPOINT_MAGIC: &str = "pcfg-induce-checkpoint v1";

/// A resumable snapshot: the iteration it was taken after, the tree set
/// and grammar of that iteration, and enough context to validate a resume.
/// Random state needs no storage: every stream is derived from (seed,
/// iteration, sentence), so the iteration number *is* the random state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Checkpoint {
    pub config: RunConfig,
    pub iteration: usize,
    pub corpus_fingerprint: u64,
    /// Grammar of this iteration in the grammar file format.
    pub grammar: String,
    /// One bracketed tree per corpus sentence.
    pub trees: Vec<String>,
}

impl Checkpoint {
    pub fn build<F: Real>(
        state: &SamplerState<F>,
        config: &RunConfig,
        vocab: &Vocabulary,
        corpus_fingerprint: u64,
    ) -> Result<Checkpoint> {
        let mut grammar = Vec::new();
        write_grammar(&state.grammar, vocab, &mut grammar)?;
        Ok(Checkpoint {
            config: config.clone(),
            iteration: state.iteration,
            corpus_fingerprint,
            grammar: String::from_utf8(grammar)
                .map_err(|_| Error::Internal("grammar serialized to non-UTF-8".into()))?,
            trees: state.trees.iter().map(emit_bracketed).collect(),
        })
    }

    /// Checks that this checkpoint belongs to (corpus, config). The
    /// iteration target may differ (that is how a run is extended), and
    /// `workers` never affects results; everything else must match.
    pub fn validate(&self, corpus: &Corpus, config: &RunConfig) -> Result<()> {
        let fp = corpus_fingerprint(corpus);
        if fp != self.corpus_fingerprint {
            return Err(Error::data(format!(
                "checkpoint was taken on a different corpus (fingerprint {:x}, expected {fp:x})",
                self.corpus_fingerprint
            )));
        }
        let stored = &self.config;
        let same = stored.max_depth == config.max_depth
            && stored.categories == config.categories
            && stored.beta == config.beta
            && stored.burn_in == config.burn_in
            && stored.sample_every == config.sample_every
            && stored.seed == config.seed
            && stored.containment_iters == config.containment_iters;
        if !same {
            return Err(Error::param(
                "checkpoint config differs from the requested config (only the iteration target and worker count may change on resume)",
            ));
        }
        if config.iterations <= self.iteration {
            return Err(Error::param(format!(
                "checkpoint is already at iteration {}, nothing to resume for a {}-iteration run",
                self.iteration, config.iterations
            )));
        }
        Ok(())
    }

    pub fn parsed_trees(&self) -> Result<Vec<Tree>> {
        self.trees.iter().map(|t| parse_bracketed(t)).collect()
    }
}

pub fn write_checkpoint_file(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = BufWriter::new(fs::File::create(&tmp)?);
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        serde_json::to_writer(&mut out, ckpt)
            .map_err(|e| Error::Internal(format!("checkpoint serialization failed: {e}")))?;
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint_file(path: &Path) -> Result<Checkpoint> {
    let mut reader = std::io::BufReader::new(fs::File::open(path)?);
    let mut magic = String::new();
    reader.read_line(&mut magic)?;
    if magic.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::data(format!(
            "{} is not a checkpoint file (bad header)",
            path.display()
        )));
    }
    let mut body = String::new();
    reader.read_to_string(&mut body)?;
    serde_json::from_str(&body)
        .map_err(|e| Error::data(format!("malformed checkpoint {}: {e}", path.display())))
}

pub fn corpus_fingerprint(corpus: &Corpus) -> u64 {
    rng::fingerprint_tokens(corpus.sentences().iter().map(|s| s.as_slice()))
}

/// Runs the sampler. Iteration 0 draws the grammar from the prior and
/// initializes trees by per-sentence sampling under it; iterations 1..=N
/// alternate the two conditional draws. With `resume`, the run continues
/// from the checkpoint's iteration instead, reproducing exactly the
/// iterations an uninterrupted run would have produced.
pub fn gibbs_run<F: Real>(
    corpus: &Corpus,
    config: &RunConfig,
    sink: &mut dyn RunSink<F>,
    resume: Option<&Checkpoint>,
) -> Result<SamplerState<F>> {
    config.validate()?;
    if corpus.len() == 0 {
        return Err(Error::data("corpus has no sentences"));
    }
    let vocab = corpus.vocabulary();
    let fingerprint = corpus_fingerprint(corpus);
    let pool = match config.workers {
        0 => None,
        n => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("worker pool: {e}")))?,
        ),
    };

    let mode = match config.max_depth {
        Some(d) => CountMode::Bounded(d),
        None => CountMode::Plain,
    };

    let (start, mut trees) = match resume {
        Some(ckpt) => {
            ckpt.validate(corpus, config)?;
            (ckpt.iteration + 1, ckpt.parsed_trees()?)
        }
        None => (0, Vec::new()),
    };

    let beta = F::from_f64_lossy(config.beta);
    let mut state = None;
    let mut containment_warned = false;
    for t in start..=config.iterations {
        // Grammar draw: prior at t=0 (zero counts), posterior otherwise.
        let counts = if t == 0 {
            CountMatrix::zeros(config.categories, vocab.len())
        } else {
            count_rules::<F>(&trees, mode, config.categories, vocab)?
        };
        let grammar_seed = rng::derive_seed(&[config.seed, t as u64]);
        let grammar = sample_posterior_grammar(&counts, beta, grammar_seed)?;

        let chart_grammar = match config.max_depth {
            None => ChartGrammar::from_plain(&grammar),
            Some(d) => {
                let h = compute_containment(&grammar, d, config.containment_iters)?;
                if !containment_warned {
                    if let Some(msg) = h.convergence_warning() {
                        sink.on_warning(t, &msg);
                        containment_warned = true;
                    }
                }
                ChartGrammar::from_bounded(&bound_grammar(&grammar, &h)?)?
            }
        };

        let resampled = sample_all_sentences(
            corpus,
            &chart_grammar,
            config.seed,
            t,
            pool.as_ref(),
        )?;
        trees = resampled.0;
        let corpus_log_lik = resampled.1;

        if cfg!(debug_assertions) {
            if let Some(d) = config.max_depth {
                for (i, tree) in trees.iter().enumerate() {
                    let depth = left_corner_depth(tree)?;
                    if depth > d {
                        return Err(Error::Internal(format!(
                            "iteration {t}: sentence {i} sampled at depth {depth} > bound {d}"
                        )));
                    }
                }
            }
        }

        let new_state = SamplerState {
            iteration: t,
            grammar,
            trees: trees.clone(),
            corpus_log_lik,
        };
        sink.on_iteration(&new_state)?;
        if t > config.burn_in && (t - config.burn_in) % config.sample_every == 0 {
            sink.emit_samples(t, &new_state.trees)?;
        }
        if sink.checkpoint_wanted(t, t == config.iterations) {
            let ckpt = Checkpoint::build(&new_state, config, vocab, fingerprint)?;
            sink.write_checkpoint(&ckpt)?;
        }
        state = Some(new_state);
    }
    state.ok_or_else(|| Error::Internal("run finished without any iteration".into()))
}

/// Redraws every sentence's tree under `grammar`, in parallel, each from
/// its own stream derived from (seed, iteration, sentence index) — the
/// result does not depend on scheduling or worker count.
fn sample_all_sentences<F: Real>(
    corpus: &Corpus,
    grammar: &ChartGrammar<F>,
    seed: u64,
    iteration: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(Vec<Tree>, F)> {
    let vocab = corpus.vocabulary();
    let run = || -> Result<Vec<(Tree, F)>> {
        (0..corpus.len())
            .into_par_iter()
            .map(|i| {
                let chart = build_inside_chart(grammar, corpus.sentence(i), BuildPath::Batched)?;
                let mut stream =
                    rng::stream(seed, rng::domain::SENTENCE, &[iteration as u64, i as u64]);
                let sampled = sample_tree(&chart, grammar, vocab, &mut stream).map_err(|e| {
                    // All rules keep prior mass, so every sentence parses
                    // under every sampled grammar; reaching this is a bug.
                    Error::Internal(format!(
                        "iteration {iteration}: sentence {i} unexpectedly unparsable: {e}"
                    ))
                })?;
                Ok((sampled.tree, chart.log_likelihood()))
            })
            .collect()
    };
    let results = match pool {
        Some(p) => p.install(run),
        None => run(),
    }?;
    let mut trees = Vec::with_capacity(results.len());
    let mut total = F::zero();
    for (tree, ll) in results {
        trees.push(tree);
        total = total + ll;
    }
    Ok((trees, total))
}

/// Plateau test on a log-likelihood trace: true when the means of the
/// last two same-sized windows differ by less than `tolerance` relative
/// to the earlier window's mean.
pub fn detect_convergence(trace: &[f64], window: usize, tolerance: f64) -> Result<bool> {
    if window == 0 {
        return Err(Error::param("window must be at least 1"));
    }
    if trace.len() < 2 * window {
        return Err(Error::param(format!(
            "trace has {} entries, need at least {} for two windows",
            trace.len(),
            2 * window
        )));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let last = mean(&trace[trace.len() - window..]);
    let prev = mean(&trace[trace.len() - 2 * window..trace.len() - window]);
    Ok((last - prev).abs() < tolerance * prev.abs())
}

/// Sink that writes run outputs under a directory: `trace.tsv`,
/// `samples/iter<t>.trees`, and `checkpoint` (rewritten on a cadence and
/// at the final iteration).
pub struct DirectorySink {
    dir: PathBuf,
    trace: BufWriter<fs::File>,
    checkpoint_every: usize,
}

impl DirectorySink {
    pub const TRACE_HEADER: &'static str = "iteration\tlogLikelihood";

    /// Starts a fresh run directory. Refuses to touch an existing trace.
    pub fn create(dir: impl Into<PathBuf>, checkpoint_every: usize) -> Result<DirectorySink> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("samples"))?;
        let mut trace = BufWriter::new(
            fs::File::create_new(dir.join("trace.tsv")).map_err(|e| {
                Error::data(format!(
                    "refusing to overwrite {}: {e}",
                    dir.join("trace.tsv").display()
                ))
            })?,
        );
        writeln!(trace, "{}", Self::TRACE_HEADER)?;
        trace.flush()?;
        Ok(DirectorySink {
            dir,
            trace,
            checkpoint_every,
        })
    }

    /// Reopens a run directory to continue from `resume_iteration`. Trace
    /// rows beyond the checkpoint (from a run that died mid-write) are
    /// dropped; the resumed run regenerates them identically.
    pub fn resume(
        dir: impl Into<PathBuf>,
        checkpoint_every: usize,
        resume_iteration: usize,
    ) -> Result<DirectorySink> {
        let dir = dir.into();
        let trace_path = dir.join("trace.tsv");
        let existing = fs::read_to_string(&trace_path)
            .map_err(|e| Error::data(format!("cannot resume, no trace at {}: {e}", trace_path.display())))?;
        let mut kept = vec![Self::TRACE_HEADER.to_owned()];
        for line in existing.lines().skip(1) {
            let Some((iter_text, _)) = line.split_once('\t') else { continue };
            match iter_text.parse::<usize>() {
                Ok(i) if i <= resume_iteration => kept.push(line.to_owned()),
                _ => {}
            }
        }
        fs::create_dir_all(dir.join("samples"))?;
        fs::write(&trace_path, kept.join("\n") + "\n")?;
        let trace = BufWriter::new(fs::File::options().append(true).open(&trace_path)?);
        Ok(DirectorySink {
            dir,
            trace,
            checkpoint_every,
        })
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join("checkpoint")
    }

    pub fn sample_path(&self, iteration: usize) -> PathBuf {
        self.dir.join("samples").join(format!("iter{iteration}.trees"))
    }
}

impl<F: Real> RunSink<F> for DirectorySink {
    fn on_iteration(&mut self, state: &SamplerState<F>) -> Result<()> {
        writeln!(
            self.trace,
            "{}\t{}",
            state.iteration,
            format_loglik(state.corpus_log_lik.to_f64_lossy())
        )?;
        self.trace.flush()?;
        Ok(())
    }

    fn emit_samples(&mut self, iteration: usize, trees: &[Tree]) -> Result<()> {
        // Plain create: determinism makes any re-emission after a resume
        // byte-identical, so overwriting is safe here.
        let mut out = BufWriter::new(fs::File::create(self.sample_path(iteration))?);
        for tree in trees {
            writeln!(out, "{}", emit_bracketed(tree))?;
        }
        out.flush()?;
        Ok(())
    }

    fn checkpoint_wanted(&self, iteration: usize, is_last: bool) -> bool {
        is_last || (self.checkpoint_every > 0 && iteration % self.checkpoint_every == 0)
    }

    fn write_checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        write_checkpoint_file(&self.checkpoint_path(), checkpoint)
    }

    fn on_warning(&mut self, iteration: usize, message: &str) {
        eprintln!("warning (iteration {iteration}): {message}");
    }
}

/// Trace numbers carry full double precision so resumed and fresh runs
/// produce byte-identical files.
pub fn format_loglik(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.17e}")
    }
}

/// In-memory sink for tests and library callers.
#[derive(Default)]
pub struct MemorySink {
    pub trace: Vec<(usize, f64)>,
    pub emissions: Vec<(usize, Vec<Tree>)>,
    pub checkpoints: Vec<Checkpoint>,
    pub warnings: Vec<(usize, String)>,
    /// Iterations after which a checkpoint should be captured.
    pub checkpoint_at: Vec<usize>,
}

impl<F: Real> RunSink<F> for MemorySink {
    fn on_iteration(&mut self, state: &SamplerState<F>) -> Result<()> {
        self.trace
            .push((state.iteration, state.corpus_log_lik.to_f64_lossy()));
        Ok(())
    }

    fn emit_samples(&mut self, iteration: usize, trees: &[Tree]) -> Result<()> {
        self.emissions.push((iteration, trees.to_vec()));
        Ok(())
    }

    fn checkpoint_wanted(&self, iteration: usize, _is_last: bool) -> bool {
        self.checkpoint_at.contains(&iteration)
    }

    fn write_checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        self.checkpoints.push(checkpoint.clone());
        Ok(())
    }

    fn on_warning(&mut self, iteration: usize, message: &str) {
        self.warnings.push((iteration, message.to_owned()));
    }
}
