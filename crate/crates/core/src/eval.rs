//! Unlabeled PARSEVAL scoring.
//!
//! Predicted and reference trees are compared on their unlabeled
//! constituent spans after punctuation removal; scores are micro-averaged
//! over the corpus. The whole-sentence span counts (EVALB-style) and
//! single-word spans never do; a switch excludes root spans instead for
//! sensitivity checks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::treebank::{strip_punctuation, Tree};

/// Multiset of unlabeled constituent spans of width ≥ 2, half-open over
/// word positions. Trees without unary chains cannot repeat a span, but
/// intersection is defined on multisets so pathological inputs still
/// score sanely.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpanSet {
    counts: BTreeMap<(usize, usize), usize>,
}

impl SpanSet {
    pub fn len(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn contains(&self, span: (usize, usize)) -> bool {
        self.counts.contains_key(&span)
    }

    pub fn spans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.keys().copied()
    }

    /// Size of the multiset intersection.
    pub fn matched(&self, other: &SpanSet) -> usize {
        self.counts
            .iter()
            .map(|(span, &n)| n.min(other.counts.get(span).copied().unwrap_or(0)))
            .sum()
    }

    fn remove(&mut self, span: (usize, usize)) {
        if let Some(n) = self.counts.get_mut(&span) {
            *n -= 1;
            if *n == 0 {
                self.counts.remove(&span);
            }
        }
    }
}

/// Spans of every constituent covering at least two words, the
/// whole-sentence span included. Flat nodes contribute only their own
/// span, so merged trees claim less and concede precision nothing.
pub fn extract_spans(tree: &Tree) -> SpanSet {
    let mut set = SpanSet::default();
    collect(tree, 0, &mut set);
    set
}

fn collect(tree: &Tree, start: usize, set: &mut SpanSet) -> usize {
    match tree {
        Tree::Leaf(_) => 1,
        Tree::Node { children, .. } => {
            let mut width = 0;
            for child in children {
                width += collect(child, start + width, set);
            }
            if width >= 2 {
                *set.counts.entry((start, start + width)).or_default() += 1;
            }
            width
        }
    }
}

#[derive(Clone, Copy)]
pub struct EvalOptions<'a> {
    /// Applied to leaf tokens of gold and predicted trees alike before
    /// span extraction.
    pub is_punctuation: &'a dyn Fn(&str) -> bool,
    /// Count the whole-sentence span (the default). Disabling it removes
    /// one span per tree from both sides.
    pub include_root_span: bool,
}

impl Default for EvalOptions<'_> {
    fn default() -> Self {
        EvalOptions {
            is_punctuation: &crate::treebank::default_is_punctuation,
            include_root_span: true,
        }
    }
}

/// Per-sentence tallies, kept for diagnostics output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SentenceEval {
    pub matched: usize,
    pub gold_spans: usize,
    pub predicted_spans: usize,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub matched: usize,
    pub gold_spans: usize,
    pub predicted_spans: usize,
    /// Number of all-punctuation sentences left out of both sums.
    pub skipped: usize,
    /// One entry per input sentence; `None` marks a skipped sentence.
    pub sentences: Vec<Option<SentenceEval>>,
}

/// Corpus-level unlabeled PARSEVAL, micro-averaged: recall and precision
/// are ratios of summed matched spans to summed gold / predicted spans.
/// Sentence `i` of both lists must share a yield once punctuation is
/// removed; sentences that were punctuation throughout are skipped.
pub fn unlabeled_parseval(
    gold: &[Tree],
    predicted: &[Tree],
    options: &EvalOptions,
) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::data(format!(
            "{} gold trees but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let mut report = EvalReport {
        recall: 0.0,
        precision: 0.0,
        f1: 0.0,
        matched: 0,
        gold_spans: 0,
        predicted_spans: 0,
        skipped: 0,
        sentences: Vec::with_capacity(gold.len()),
    };
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let g = strip_punctuation(g, options.is_punctuation);
        let p = strip_punctuation(p, options.is_punctuation);
        let (g, p) = match (g, p) {
            (None, None) => {
                report.skipped += 1;
                report.sentences.push(None);
                continue;
            }
            (Some(g), Some(p)) => (g, p),
            _ => {
                return Err(Error::data(format!(
                    "sentence {i}: punctuation stripping emptied only one of gold and prediction"
                )))
            }
        };
        if g.leaves() != p.leaves() {
            return Err(Error::data(format!(
                "sentence {i}: gold and predicted yields differ after punctuation removal"
            )));
        }
        let mut gs = extract_spans(&g);
        let mut ps = extract_spans(&p);
        if !options.include_root_span {
            let root = (0, g.num_leaves());
            gs.remove(root);
            ps.remove(root);
        }
        let sent = SentenceEval {
            matched: gs.matched(&ps),
            gold_spans: gs.len(),
            predicted_spans: ps.len(),
        };
        report.matched += sent.matched;
        report.gold_spans += sent.gold_spans;
        report.predicted_spans += sent.predicted_spans;
        report.sentences.push(Some(sent));
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    report.recall = ratio(report.matched, report.gold_spans);
    report.precision = ratio(report.matched, report.predicted_spans);
    report.f1 = if report.recall + report.precision > 0.0 {
        2.0 * report.recall * report.precision / (report.recall + report.precision)
    } else {
        0.0
    };
    Ok(report)
}
