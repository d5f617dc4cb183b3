//! Posterior inference on constituents.
//!
//! Tree samples — any number of them, pooled across runs — are reduced to
//! per-sentence span and split counts, and a single tree per sentence is
//! decoded by recursive argmax over split posteriors. Because the decision
//! is made span by span, the decoded tree need not appear in any
//! individual sample. Optionally, short spans whose split choice was
//! nearly a coin flip are flattened into non-binary nodes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::treebank::Tree;

/// Span and split counts for one sentence, aggregated over samples.
/// Spans are half-open `(i, j)` over word positions; a split at `k`
/// divides `(i, j)` into `(i, k)` and `(k, j)`. Labels and depths are
/// discarded — only unlabeled bracketing evidence is kept. Counts from
/// different runs over the same sentence are additive (`merge`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpanStats {
    pub len: usize,
    pub total_samples: usize,
    pub span_count: BTreeMap<(usize, usize), usize>,
    pub split_count: BTreeMap<(usize, usize, usize), usize>,
}

impl SpanStats {
    /// Counts spans over one sentence's samples. Each distinct span is
    /// counted once per sample (set semantics), so a preterminal and its
    /// word do not double-count the width-1 span. Width-1 spans are
    /// constituents too and appear in every sample.
    pub fn from_trees(samples: &[Tree]) -> Result<SpanStats> {
        let Some(first) = samples.first() else {
            return Err(Error::data("no samples to aggregate"));
        };
        let len = first.num_leaves();
        let mut stats = SpanStats {
            len,
            total_samples: samples.len(),
            ..SpanStats::default()
        };
        for (s, tree) in samples.iter().enumerate() {
            if tree.num_leaves() != len {
                return Err(Error::data(format!(
                    "sample {s} has {} words where earlier samples had {len}",
                    tree.num_leaves()
                )));
            }
            let mut spans = BTreeSet::new();
            let mut splits = BTreeSet::new();
            record(tree, 0, &mut spans, &mut splits);
            for span in spans {
                *stats.span_count.entry(span).or_default() += 1;
            }
            for split in splits {
                *stats.split_count.entry(split).or_default() += 1;
            }
        }
        Ok(stats)
    }

    pub fn span(&self, i: usize, j: usize) -> usize {
        self.span_count.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn split(&self, i: usize, j: usize, k: usize) -> usize {
        self.split_count.get(&(i, j, k)).copied().unwrap_or(0)
    }

    /// Monte-Carlo split posterior: fraction of the samples containing
    /// `(i, j)` that split it at `k`. Zero when the span was never seen.
    pub fn split_posterior(&self, i: usize, j: usize, k: usize) -> f64 {
        match self.span(i, j) {
            0 => 0.0,
            n => self.split(i, j, k) as f64 / n as f64,
        }
    }

    /// Adds another run's counts for the same sentence.
    pub fn merge(&mut self, other: &SpanStats) -> Result<()> {
        if self.len != other.len {
            return Err(Error::data(format!(
                "cannot merge statistics for a {}-word sentence into a {}-word one",
                other.len, self.len
            )));
        }
        self.total_samples += other.total_samples;
        for (&span, &n) in &other.span_count {
            *self.span_count.entry(span).or_default() += n;
        }
        for (&split, &n) in &other.split_count {
            *self.split_count.entry(split).or_default() += n;
        }
        Ok(())
    }
}

fn record(
    tree: &Tree,
    start: usize,
    spans: &mut BTreeSet<(usize, usize)>,
    splits: &mut BTreeSet<(usize, usize, usize)>,
) -> usize {
    let width = match tree {
        Tree::Leaf(_) => 1,
        Tree::Node { children, .. } => {
            let mut k = start;
            let mut cuts = Vec::with_capacity(children.len());
            for child in children {
                k += record(child, k, spans, splits);
                cuts.push(k);
            }
            if children.len() == 2 {
                splits.insert((start, k, cuts[0]));
            }
            k - start
        }
    };
    spans.insert((start, start + width));
    width
}

/// Aggregates per-sentence sample lists: `samples[i]` holds every sampled
/// tree for sentence `i`, pooled over emissions and runs.
pub fn collect_span_stats(samples: &[Vec<Tree>]) -> Result<Vec<SpanStats>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, trees)| {
            SpanStats::from_trees(trees)
                .map_err(|e| Error::data(format!("sentence {i}: {e}")))
        })
        .collect()
}

/// Decodes the maximum-a-posteriori unlabeled tree: starting from the
/// whole sentence, each span picks the split with the highest posterior
/// (ties to the smallest split point) and recurses into both sides. A
/// span no sample ever produced falls back to the split whose two child
/// spans have the largest combined count. Internal nodes are labeled `X`;
/// width-1 children are bare words.
pub fn map_decode(stats: &SpanStats, words: &[&str]) -> Result<Tree> {
    if words.len() != stats.len {
        return Err(Error::data(format!(
            "{} words supplied for statistics over {} words",
            words.len(),
            stats.len
        )));
    }
    if stats.len == 0 {
        return Err(Error::data("cannot decode an empty sentence"));
    }
    Ok(decode_span(stats, words, 0, stats.len))
}

fn decode_span(stats: &SpanStats, words: &[&str], i: usize, j: usize) -> Tree {
    if j - i == 1 {
        return Tree::leaf(words[i]);
    }
    let k = best_split(stats, i, j);
    Tree::node(
        "X",
        vec![decode_span(stats, words, i, k), decode_span(stats, words, k, j)],
    )
}

fn best_split(stats: &SpanStats, i: usize, j: usize) -> usize {
    // Strict > with ascending k makes ties resolve to the smallest k.
    let observed = stats.span(i, j) > 0;
    let mut best = (i + 1, 0);
    for k in i + 1..j {
        let weight = if observed {
            stats.split(i, j, k)
        } else {
            stats.span(i, k) + stats.span(k, j)
        };
        if weight > best.1 {
            best = (k, weight);
        }
    }
    best.0
}

/// Flattens low-confidence short constituents of a decoded tree: any
/// node covering 3 or 4 words whose top two split posteriors differ by
/// less than `threshold` loses its internal structure, its words becoming
/// direct children. Wider spans are never touched, so the result can be
/// non-binary but only locally. A threshold of 0 disables merging (the
/// comparison is strict). Spans absent from every sample count as
/// maximally uncertain (difference 0).
pub fn merge_uncertain_spans(tree: &Tree, stats: &SpanStats, threshold: f64) -> Tree {
    merge_node(tree, stats, threshold, 0)
}

fn merge_node(tree: &Tree, stats: &SpanStats, threshold: f64, start: usize) -> Tree {
    let Tree::Node { label, children } = tree else {
        return tree.clone();
    };
    let width = tree.num_leaves();
    if (3..=4).contains(&width) && split_margin(stats, start, start + width) < threshold {
        return Tree::node(label, tree.leaves().into_iter().map(Tree::leaf).collect());
    }
    let mut k = start;
    let rebuilt = children
        .iter()
        .map(|child| {
            let node = merge_node(child, stats, threshold, k);
            k += child.num_leaves();
            node
        })
        .collect();
    Tree::node(label, rebuilt)
}

/// Difference between the two highest split posteriors of `(i, j)`.
fn split_margin(stats: &SpanStats, i: usize, j: usize) -> f64 {
    if stats.span(i, j) == 0 {
        return 0.0;
    }
    let (mut top, mut second) = (0.0f64, 0.0f64);
    for k in i + 1..j {
        let p = stats.split_posterior(i, j, k);
        if p > top {
            second = top;
            top = p;
        } else if p > second {
            second = p;
        }
    }
    top - second
}
