//! The `analyze` subcommand: per-run summary tables for external
//! plotting — final likelihoods, decoded-tree accuracy, the
//! likelihood/accuracy correlation, and depth usage at the first and
//! final emissions.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use statrs::distribution::{ContinuousCDF, StudentsT};

use pcfg_induce::eval::{unlabeled_parseval, EvalOptions};
use pcfg_induce::pioc::{map_decode, merge_uncertain_spans, SpanStats};
use pcfg_induce::treebank::{depth_histogram, read_trees, Tree};

use crate::induce::trace_values;

#[derive(clap::Args)]
pub struct AnalyzeArgs {
    /// Run directories, each holding trace.tsv and samples/.
    #[arg(long, required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Gold treebank; adds accuracy columns and the correlation line.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Merge threshold for decoding each run's samples.
    #[arg(long, default_value_t = 0.3)]
    pub merge_threshold: f64,
    /// Mark the K runs with the highest final log likelihood and print
    /// their directories to stdout.
    #[arg(long)]
    pub top_k_by_loglik: Option<usize>,
    /// Output directory for runs.tsv and depths.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

struct RunSummary {
    dir: PathBuf,
    final_log_lik: f64,
    scores: Option<(f64, f64, f64)>, // recall, precision, f1
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let gold = match &args.gold {
        Some(path) => Some(
            read_trees(BufReader::new(fs::File::open(path).with_context(
                || format!("cannot open gold file {}", path.display()),
            )?))?,
        ),
        None => None,
    };

    fs::create_dir_all(&args.out)?;
    let mut depths_out = BufWriter::new(fs::File::create(args.out.join("depths.tsv"))?);
    writeln!(depths_out, "run\tstage\tdepth\tfraction")?;

    let mut summaries = Vec::new();
    for dir in &args.runs {
        let trace = trace_values(&dir.join("trace.tsv"))
            .with_context(|| format!("run {}", dir.display()))?;
        let Some(&final_log_lik) = trace.last() else {
            bail!("trace in {} has no iterations", dir.display());
        };
        let sample_files = sample_files(dir)?;
        let emissions: Vec<Vec<Tree>> = sample_files
            .iter()
            .map(|p| {
                read_trees(BufReader::new(fs::File::open(p)?))
                    .with_context(|| format!("cannot parse {}", p.display()))
            })
            .collect::<Result<_>>()?;

        for (stage, trees) in [
            ("first", emissions.first().unwrap()),
            ("final", emissions.last().unwrap()),
        ] {
            for (depth, fraction) in depth_histogram(trees)? {
                writeln!(
                    depths_out,
                    "{}\t{stage}\t{depth}\t{fraction}",
                    dir.display()
                )?;
            }
        }

        let scores = match &gold {
            Some(gold) => {
                let decoded = decode_run(&emissions, args.merge_threshold)
                    .with_context(|| format!("run {}", dir.display()))?;
                let report = unlabeled_parseval(gold, &decoded, &EvalOptions::default())
                    .with_context(|| format!("run {}", dir.display()))?;
                Some((report.recall, report.precision, report.f1))
            }
            None => None,
        };
        summaries.push(RunSummary {
            dir: dir.clone(),
            final_log_lik,
            scores,
        });
    }
    depths_out.flush()?;

    let selected: Vec<bool> = match args.top_k_by_loglik {
        None => vec![true; summaries.len()],
        Some(k) => {
            let mut order: Vec<usize> = (0..summaries.len()).collect();
            order.sort_by(|&a, &b| {
                summaries[b]
                    .final_log_lik
                    .total_cmp(&summaries[a].final_log_lik)
            });
            let mut selected = vec![false; summaries.len()];
            for &i in order.iter().take(k) {
                selected[i] = true;
            }
            selected
        }
    };

    let mut runs_out = BufWriter::new(fs::File::create(args.out.join("runs.tsv"))?);
    let mut header = String::from("run\tfinalLogLik");
    if gold.is_some() {
        header.push_str("\trecall\tprecision\tf1");
    }
    if args.top_k_by_loglik.is_some() {
        header.push_str("\tselected");
    }
    writeln!(runs_out, "{header}")?;
    for (summary, &sel) in summaries.iter().zip(&selected) {
        let mut row = format!("{}\t{}", summary.dir.display(), summary.final_log_lik);
        if let Some((r, p, f1)) = summary.scores {
            row.push_str(&format!("\t{r:.4}\t{p:.4}\t{f1:.4}"));
        }
        if args.top_k_by_loglik.is_some() {
            row.push_str(if sel { "\t1" } else { "\t0" });
        }
        writeln!(runs_out, "{row}")?;
    }
    if gold.is_some() {
        let xs: Vec<f64> = summaries.iter().map(|s| s.final_log_lik).collect();
        let ys: Vec<f64> = summaries
            .iter()
            .map(|s| s.scores.map(|(_, _, f1)| f1).unwrap_or(f64::NAN))
            .collect();
        let (r, p) = pearson(&xs, &ys);
        writeln!(runs_out, "# pearson r={r:.4} p={p:.4} n={}", xs.len())?;
    }
    runs_out.flush()?;

    if args.top_k_by_loglik.is_some() {
        let mut picked: Vec<&RunSummary> = summaries
            .iter()
            .zip(&selected)
            .filter(|(_, &sel)| sel)
            .map(|(s, _)| s)
            .collect();
        picked.sort_by(|a, b| b.final_log_lik.total_cmp(&a.final_log_lik));
        for summary in picked {
            println!("{}", summary.dir.display());
        }
    }
    Ok(())
}

/// `samples/iter<t>.trees` files of a run, in iteration order.
fn sample_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let samples = dir.join("samples");
    let mut found = Vec::new();
    let entries = fs::read_dir(&samples)
        .with_context(|| format!("no samples directory in {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(t) = name
            .strip_prefix("iter")
            .and_then(|rest| rest.strip_suffix(".trees"))
            .and_then(|n| n.parse::<usize>().ok())
        {
            found.push((t, path));
        }
    }
    if found.is_empty() {
        bail!("no sample files in {}", samples.display());
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Pools one run's emissions and decodes each sentence; the words come
/// from the samples themselves.
fn decode_run(emissions: &[Vec<Tree>], merge_threshold: f64) -> Result<Vec<Tree>> {
    let first = &emissions[0];
    for (e, trees) in emissions.iter().enumerate() {
        if trees.len() != first.len() {
            bail!(
                "emission {e} has {} trees where the first had {}",
                trees.len(),
                first.len()
            );
        }
    }
    (0..first.len())
        .map(|i| {
            let samples: Vec<Tree> =
                emissions.iter().map(|trees| trees[i].clone()).collect();
            let stats =
                SpanStats::from_trees(&samples).with_context(|| format!("sentence {i}"))?;
            let words = first[i].leaves();
            let tree = map_decode(&stats, &words)?;
            Ok(merge_uncertain_spans(&tree, &stats, merge_threshold))
        })
        .collect()
}

/// Pearson correlation with a two-sided p-value from the t distribution
/// (n − 2 degrees of freedom). Degenerate inputs give a NaN p-value;
/// perfect correlation gives p = 0.
fn pearson(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    let r = cov / (vx.sqrt() * vy.sqrt());
    if !r.is_finite() || xs.len() < 3 {
        return (r, f64::NAN);
    }
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return (r, 0.0);
    }
    let t = r * ((n - 2.0) / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 2.0).expect("valid t distribution");
    (r, 2.0 * (1.0 - dist.cdf(t.abs())))
}
