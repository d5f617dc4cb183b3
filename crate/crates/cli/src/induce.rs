//! The `induce` subcommand: configuration assembly, overwrite protection,
//! run execution, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pcfg_induce::gibbs::{
    detect_convergence, gibbs_run, read_checkpoint_file, DirectorySink, RunConfig,
};
use pcfg_induce::grammar::write_grammar;
use pcfg_induce::treebank::Corpus;

/// Trace window and relative tolerance for the manifest's
/// converged-vs-finished verdict: the means of the last two 50-iteration
/// windows must agree within 0.01%.
const CONVERGENCE_WINDOW: usize = 50;
const CONVERGENCE_TOL: f64 = 1e-4;

#[derive(clap::Args)]
pub struct InduceArgs {
    /// Corpus file: one sentence per line, whitespace-tokenized.
    pub corpus: PathBuf,
    /// Run directory to create (or continue with --resume).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Depth bound: a positive integer, or "unbounded".
    #[arg(long, value_parser = parse_depth)]
    pub depth: Option<DepthChoice>,
    /// Number of grammar categories.
    #[arg(long)]
    pub categories: Option<usize>,
    /// Dirichlet concentration for every rule distribution.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Total Gibbs iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Iterations to discard before emitting samples.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Emit the tree set every this many post-burn-in iterations.
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Random seed; fixes the entire run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed-point iterations for the containment computation.
    #[arg(long)]
    pub containment_iters: Option<usize>,
    /// Sentence-level worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Continue from the run directory's checkpoint.
    #[arg(long)]
    pub resume: bool,
    /// Checkpoint cadence in iterations (a checkpoint is always written
    /// at the final iteration).
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum DepthChoice {
    Unbounded,
    Bounded(usize),
}

fn parse_depth(text: &str) -> Result<DepthChoice, String> {
    if text.eq_ignore_ascii_case("unbounded") {
        return Ok(DepthChoice::Unbounded);
    }
    text.parse::<usize>()
        .map(DepthChoice::Bounded)
        .map_err(|_| format!("expected a positive integer or \"unbounded\", got {text:?}"))
}

/// Config-file counterpart of `RunConfig`: every field optional, depth
/// expressed as a number or the string "unbounded".
#[derive(Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PartialConfig {
    max_depth: Option<DepthSpec>,
    categories: Option<usize>,
    beta: Option<f64>,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    sample_every: Option<usize>,
    seed: Option<u64>,
    containment_iters: Option<usize>,
    workers: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DepthSpec {
    Bounded(usize),
    Keyword(String),
}

impl DepthSpec {
    fn resolve(&self) -> Result<Option<usize>> {
        match self {
            DepthSpec::Bounded(d) => Ok(Some(*d)),
            DepthSpec::Keyword(k) if k.eq_ignore_ascii_case("unbounded") => Ok(None),
            DepthSpec::Keyword(k) => bail!("maxDepth must be a number or \"unbounded\", got {k:?}"),
        }
    }
}

/// Flags take precedence over the config file, which takes precedence
/// over defaults (unbounded, 15 categories, β = 0.2, 700 iterations with
/// burn-in 500 and an emission every 2nd iteration, seed 0).
fn effective_config(args: &InduceArgs) -> Result<RunConfig> {
    let mut config = RunConfig::new(15);
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let partial: PartialConfig = serde_json::from_str(&text)
            .with_context(|| format!("malformed config file {}", path.display()))?;
        if let Some(depth) = &partial.max_depth {
            config.max_depth = depth.resolve()?;
        }
        apply(&mut config.categories, partial.categories);
        apply(&mut config.beta, partial.beta);
        apply(&mut config.iterations, partial.iterations);
        apply(&mut config.burn_in, partial.burn_in);
        apply(&mut config.sample_every, partial.sample_every);
        apply(&mut config.seed, partial.seed);
        apply(&mut config.containment_iters, partial.containment_iters);
        apply(&mut config.workers, partial.workers);
    }
    if let Some(depth) = args.depth {
        config.max_depth = match depth {
            DepthChoice::Unbounded => None,
            DepthChoice::Bounded(d) => Some(d),
        };
    }
    apply(&mut config.categories, args.categories);
    apply(&mut config.beta, args.beta);
    apply(&mut config.iterations, args.iterations);
    apply(&mut config.burn_in, args.burn_in);
    apply(&mut config.sample_every, args.sample_every);
    apply(&mut config.seed, args.seed);
    apply(&mut config.containment_iters, args.containment_iters);
    apply(&mut config.workers, args.workers);
    config.validate()?;
    Ok(config)
}

fn apply<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Converged,
    Finished,
}

/// Provenance record written next to the run outputs. `status` stays
/// `running` until the run completes, so an interrupted run is visible.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub run_directory: String,
    pub config: RunConfig,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_log_lik: Option<f64>,
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let tmp = dir.join("manifest.json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(manifest)?)?;
    fs::rename(&tmp, &path)?;
    Ok(())
}

pub fn run(args: InduceArgs) -> Result<()> {
    let config = effective_config(&args)?;
    let corpus = Corpus::load(&args.corpus)
        .with_context(|| format!("cannot load corpus {}", args.corpus.display()))?;
    let out = &args.out;

    let (mut sink, resume_from) = if args.resume {
        let ckpt = read_checkpoint_file(&out.join("checkpoint"))
            .with_context(|| format!("cannot resume from {}", out.display()))?;
        let sink = DirectorySink::resume(out, args.checkpoint_every, ckpt.iteration)?;
        (sink, Some(ckpt))
    } else {
        if out.join("manifest.json").exists() || out.join("trace.tsv").exists() {
            bail!(
                "{} already holds a run; pass --resume to continue it or pick another directory",
                out.display()
            );
        }
        fs::create_dir_all(out)?;
        (DirectorySink::create(out, args.checkpoint_every)?, None)
    };

    let mut manifest = RunManifest {
        run_directory: out.display().to_string(),
        config: config.clone(),
        status: RunStatus::Running,
        final_log_lik: None,
    };
    write_manifest(out, &manifest)?;

    let state = gibbs_run::<f64>(&corpus, &config, &mut sink, resume_from.as_ref())?;

    let mut grammar_out = fs::File::create(out.join("grammar.tsv"))?;
    write_grammar(&state.grammar, corpus.vocabulary(), &mut grammar_out)?;

    manifest.status = match trace_values(&out.join("trace.tsv"))? {
        trace if trace.len() >= 2 * CONVERGENCE_WINDOW
            && detect_convergence(&trace, CONVERGENCE_WINDOW, CONVERGENCE_TOL)? =>
        {
            RunStatus::Converged
        }
        _ => RunStatus::Finished,
    };
    manifest.final_log_lik = Some(state.corpus_log_lik);
    write_manifest(out, &manifest)?;

    println!(
        "{}: {} iterations, final log likelihood {:.4}",
        match manifest.status {
            RunStatus::Converged => "converged",
            _ => "finished",
        },
        state.iteration,
        state.corpus_log_lik
    );
    Ok(())
}

/// Log-likelihood column of a trace file, in iteration order.
pub fn trace_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read trace {}", path.display()))?;
    let mut values = Vec::new();
    for line in text.lines().skip(1) {
        let Some((_, ll)) = line.split_once('\t') else {
            bail!("malformed trace line {line:?} in {}", path.display());
        };
        values.push(
            ll.trim()
                .parse::<f64>()
                .with_context(|| format!("bad log likelihood {ll:?} in {}", path.display()))?,
        );
    }
    Ok(values)
}
