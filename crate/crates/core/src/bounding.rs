//! Left-corner depth bounding.
//!
//! A grammar is bounded by reweighting it with containment likelihoods:
//! the probability that a category, sitting as a left or right sibling at a
//! given depth, generates a complete yield without the parse ever needing
//! more than D stack elements. Rules that would force deeper embedding lose
//! exactly the mass of their offending outcomes, and each surviving row is
//! renormalized, so the bounded grammar is a PCFG over side/depth-annotated
//! categories that assigns probability zero to any tree deeper than D.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::grammar::{CategorySet, CountMatrix, Grammar, Vocabulary};
use crate::num::Real;

/// Whether a node is a left or right sibling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    L,
    R,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::L => "L",
            Side::R => "R",
        })
    }
}

/// A side/depth slot in the bounded category space. The root sits at
/// (R, 0); left positions run 1..=D+1, right positions 0..=D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub side: Side,
    pub depth: usize,
}

impl Position {
    pub const ROOT: Position = Position {
        side: Side::R,
        depth: 0,
    };

    pub fn l(depth: usize) -> Position {
        Position {
            side: Side::L,
            depth,
        }
    }

    pub fn r(depth: usize) -> Position {
        Position {
            side: Side::R,
            depth,
        }
    }

    pub fn is_valid(&self, max_depth: usize) -> bool {
        match self.side {
            Side::L => (1..=max_depth + 1).contains(&self.depth),
            Side::R => self.depth <= max_depth,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.side, self.depth)
    }
}

/// Positions of a node's children: a left child keeps its parent's depth
/// when the parent is a left sibling and descends one level when the parent
/// is a right sibling; a right child always keeps the parent's depth.
pub fn child_positions(parent: Position) -> (Position, Position) {
    match parent.side {
        Side::L => (Position::l(parent.depth), Position::r(parent.depth)),
        Side::R => (Position::l(parent.depth + 1), Position::r(parent.depth)),
    }
}

/// All valid positions for a bound, in index order: (R,0), then left
/// depths ascending, then right depths ascending.
pub fn all_positions(max_depth: usize) -> Vec<Position> {
    let mut out = vec![Position::ROOT];
    out.extend((1..=max_depth + 1).map(Position::l));
    out.extend((1..=max_depth).map(Position::r));
    out
}

/// Threshold on the final iterate change above which containment is
/// considered unconverged and a warning is warranted.
pub const CONVERGENCE_WARN_TOL: f64 = 1e-8;

/// Side/depth-specific containment likelihoods h[(s,d)][c]: the
/// probability that category c, as an s-side sibling at depth d, generates
/// a complete yield within the bound.
#[derive(Clone, Debug)]
pub struct Containment<F> {
    max_depth: usize,
    iterations: usize,
    categories: usize,
    h: BTreeMap<Position, Array1<F>>,
    term_mass: Array1<F>,
    final_change: F,
}

impl<F: Real> Containment<F> {
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn value(&self, pos: Position) -> &Array1<F> {
        &self.h[&pos]
    }

    pub fn terminal_mass(&self) -> &Array1<F> {
        &self.term_mass
    }

    /// Largest entrywise change of the final iteration.
    pub fn final_change(&self) -> F {
        self.final_change
    }

    /// A human-readable warning if the fixed point was not reached.
    pub fn convergence_warning(&self) -> Option<String> {
        (self.final_change.to_f64_lossy() > CONVERGENCE_WARN_TOL).then(|| {
            format!(
                "containment not converged after {} iterations (last change {:e})",
                self.iterations,
                self.final_change.to_f64_lossy()
            )
        })
    }
}

/// Iterates the containment recursion `iterations` times from h = 0.
///
/// Per iteration, every position's vector is recomputed from the previous
/// iterate (the root boundary (R,0) stays the indicator of T throughout):
/// left positions read their own depth on both sides, right positions read
/// depth d+1 on the left — the center-embedding step — and their own depth
/// on the right. Left positions at D+1 have no right sibling resource, so
/// only their terminal mass survives. The iteration is monotone
/// nondecreasing, which is verified as it runs.
pub fn compute_containment<F: Real>(
    g: &Grammar<F>,
    max_depth: usize,
    iterations: usize,
) -> Result<Containment<F>> {
    if max_depth < 1 {
        return Err(Error::param("maximum depth must be at least 1"));
    }
    if iterations < 1 {
        return Err(Error::param("containment needs at least one iteration"));
    }
    let c = g.categories();
    let binary = g.binary_block();
    let term_mass: Array1<F> = g
        .terminal_block()
        .rows()
        .into_iter()
        .map(|row| row.iter().copied().sum())
        .collect();

    let mut h: BTreeMap<Position, Array1<F>> = all_positions(max_depth)
        .into_iter()
        .map(|p| (p, Array1::zeros(c)))
        .collect();
    let mut root = Array1::zeros(c);
    root[CategorySet::TOP] = F::one();
    h.insert(Position::ROOT, root);

    let mut final_change = F::zero();
    let mut scratch = Array1::zeros(c * c);
    for _ in 0..iterations {
        let mut next = h.clone();
        let mut change = F::zero();
        for d in 1..=max_depth + 1 {
            let pos = Position::l(d);
            let (pl, pr) = child_positions(pos);
            let updated = if d == max_depth + 1 {
                // No right sibling exists below the bound: binary
                // expansion is impossible, terminal mass is all there is.
                term_mass.clone()
            } else {
                containment_step(&binary, &term_mass, &h[&pl], &h[&pr], &mut scratch)
            };
            change = track_change(&h[&pos], &updated, change)?;
            next.insert(pos, updated);
        }
        for d in 1..=max_depth {
            let pos = Position::r(d);
            let (pl, pr) = child_positions(pos);
            let updated = containment_step(&binary, &term_mass, &h[&pl], &h[&pr], &mut scratch);
            change = track_change(&h[&pos], &updated, change)?;
            next.insert(pos, updated);
        }
        h = next;
        final_change = change;
    }

    Ok(Containment {
        max_depth,
        iterations,
        categories: c,
        h,
        term_mass,
        final_change,
    })
}

/// One update: termMass + G_binary · (h_left ⊗ h_right), capped at 1.
fn containment_step<F: Real>(
    binary: &ndarray::ArrayView2<'_, F>,
    term_mass: &Array1<F>,
    h_left: &Array1<F>,
    h_right: &Array1<F>,
    outer: &mut Array1<F>,
) -> Array1<F> {
    let c = term_mass.len();
    for a in 0..c {
        let ha = h_left[a];
        for b in 0..c {
            outer[a * c + b] = ha * h_right[b];
        }
    }
    let mut out = binary.dot(outer);
    for (o, &t) in out.iter_mut().zip(term_mass.iter()) {
        *o = *o + t;
        if *o > F::one() {
            *o = F::one();
        }
    }
    out
}

fn track_change<F: Real>(old: &Array1<F>, new: &Array1<F>, mut change: F) -> Result<F> {
    for (&o, &n) in old.iter().zip(new.iter()) {
        if n < o {
            return Err(Error::Internal(format!(
                "containment iterate decreased: {o} -> {n}"
            )));
        }
        let d = n - o;
        if d > change {
            change = d;
        }
    }
    Ok(change)
}

/// Bijection between (position, category) pairs and dense chart symbols
/// 0..B-1, where B = 2·D·C + C + 1: one slot for the root (R,0,T), C slots
/// per left depth 1..=D+1, and C per right depth 1..=D.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PositionIndex {
    max_depth: usize,
    categories: usize,
}

impl PositionIndex {
    pub fn new(max_depth: usize, categories: usize) -> Result<PositionIndex> {
        if max_depth < 1 {
            return Err(Error::param("maximum depth must be at least 1"));
        }
        if categories < 1 {
            return Err(Error::param("need at least one category"));
        }
        Ok(PositionIndex {
            max_depth,
            categories,
        })
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn len(&self) -> usize {
        2 * self.max_depth * self.categories + self.categories + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The root symbol (R,0,T).
    pub fn root(&self) -> usize {
        0
    }

    pub fn id(&self, pos: Position, cat: usize) -> Option<usize> {
        if cat >= self.categories || !pos.is_valid(self.max_depth) {
            return None;
        }
        let c = self.categories;
        match (pos.side, pos.depth) {
            (Side::R, 0) => (cat == CategorySet::TOP).then_some(0),
            (Side::L, d) => Some(1 + (d - 1) * c + cat),
            (Side::R, d) => Some(1 + (self.max_depth + 1) * c + (d - 1) * c + cat),
        }
    }

    pub fn decode(&self, id: usize) -> (Position, usize) {
        assert!(id < self.len(), "chart symbol {id} out of range");
        if id == 0 {
            return (Position::ROOT, CategorySet::TOP);
        }
        let c = self.categories;
        let rest = id - 1;
        let block = rest / c;
        let cat = rest % c;
        if block < self.max_depth + 1 {
            (Position::l(block + 1), cat)
        } else {
            (Position::r(block - self.max_depth), cat)
        }
    }
}

/// A depth-bounded grammar: one row-stochastic table per position over the
/// plain child outcomes (children's positions are implied by the parent's),
/// with rows zeroed and flagged unusable where containment vanishes.
#[derive(Clone, Debug)]
pub struct BoundedGrammar<F> {
    index: PositionIndex,
    vocab: usize,
    tables: BTreeMap<Position, Array2<F>>,
    usable: BTreeMap<Position, Vec<bool>>,
}

impl<F: Real> BoundedGrammar<F> {
    pub fn max_depth(&self) -> usize {
        self.index.max_depth()
    }

    pub fn categories(&self) -> usize {
        self.index.categories()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn index(&self) -> &PositionIndex {
        &self.index
    }

    pub fn table(&self, pos: Position) -> &Array2<F> {
        &self.tables[&pos]
    }

    pub fn is_usable(&self, pos: Position, cat: usize) -> bool {
        self.usable
            .get(&pos)
            .map(|u| u[cat])
            .unwrap_or(false)
    }

    pub fn binary_prob(&self, pos: Position, parent: usize, left: usize, right: usize) -> F {
        let c = self.index.categories();
        self.tables[&pos][[parent, left * c + right]]
    }

    pub fn terminal_prob(&self, pos: Position, parent: usize, word: usize) -> F {
        let c = self.index.categories();
        self.tables[&pos][[parent, c * c + word]]
    }
}

/// Reweights `g` by the containment likelihoods: at parent position p with
/// child positions (p_L, p_R), a binary outcome keeps g(c → a b) ·
/// h[p_L][a] · h[p_R][b] and a terminal outcome keeps g(c → w), and the
/// surviving row is renormalized (at the fixed point the normalizer equals
/// h[p][c]; summing the numerators makes usable rows exactly stochastic
/// even when the iteration stopped short). Rows with h[p][c] below the
/// usability floor are zeroed and marked unusable.
pub fn bound_grammar<F: Real>(g: &Grammar<F>, h: &Containment<F>) -> Result<BoundedGrammar<F>> {
    if h.categories() != g.categories() {
        return Err(Error::param(format!(
            "containment was computed for {} categories, grammar has {}",
            h.categories(),
            g.categories()
        )));
    }
    let c = g.categories();
    let w = g.vocab_size();
    let index = PositionIndex::new(h.max_depth(), c)?;

    let mut tables = BTreeMap::new();
    let mut usable = BTreeMap::new();
    for pos in all_positions(h.max_depth()) {
        let (pl, pr) = child_positions(pos);
        let hl = valid_or_zero(h, pl);
        let hr = valid_or_zero(h, pr);
        let hp = h.value(pos);
        let mut table: Array2<F> = Array2::zeros((c, c * c + w));
        let mut flags = vec![false; c];
        for parent in 0..c {
            if hp[parent] < F::CONTAINMENT_EPS {
                continue;
            }
            let mut sum = F::zero();
            for a in 0..c {
                let ha = match &hl {
                    Some(v) => v[a],
                    None => F::zero(),
                };
                if ha == F::zero() {
                    continue;
                }
                for b in 0..c {
                    let hb = match &hr {
                        Some(v) => v[b],
                        None => F::zero(),
                    };
                    let keep = g.binary_prob(parent, a, b) * ha * hb;
                    table[[parent, a * c + b]] = keep;
                    sum = sum + keep;
                }
            }
            for word in 0..w {
                let keep = g.terminal_prob(parent, word);
                table[[parent, c * c + word]] = keep;
                sum = sum + keep;
            }
            if !(sum > F::zero()) {
                // At (R,0) the containment vector is the boundary
                // indicator of T, so "containment 1, zero mass" just
                // means the start symbol generates nothing within the
                // bound: leave the row unusable. Anywhere else the
                // iteration's monotonicity guarantees surviving mass.
                if pos == Position::ROOT {
                    table.row_mut(parent).fill(F::zero());
                    continue;
                }
                return Err(Error::Internal(format!(
                    "category {parent} at {pos} has containment {} but no surviving mass",
                    hp[parent]
                )));
            }
            let mut row = table.row_mut(parent);
            for v in row.iter_mut() {
                *v = *v / sum;
            }
            flags[parent] = true;
        }
        tables.insert(pos, table);
        usable.insert(pos, flags);
    }

    Ok(BoundedGrammar {
        index,
        vocab: w,
        tables,
        usable,
    })
}

fn valid_or_zero<'a, F: Real>(h: &'a Containment<F>, pos: Position) -> Option<&'a Array1<F>> {
    pos.is_valid(h.max_depth()).then(|| h.value(pos))
}

/// Per-position rule counts, used when tallying bounded trees.
#[derive(Clone, Debug)]
pub struct PositionCounts<F> {
    categories: usize,
    vocab: usize,
    counts: BTreeMap<Position, CountMatrix<F>>,
}

impl<F: Real> PositionCounts<F> {
    pub fn new(categories: usize, vocab: usize) -> Self {
        PositionCounts {
            categories,
            vocab,
            counts: BTreeMap::new(),
        }
    }

    fn entry(&mut self, pos: Position) -> &mut CountMatrix<F> {
        let (categories, vocab) = (self.categories, self.vocab);
        self.counts
            .entry(pos)
            .or_insert_with(|| CountMatrix::zeros(categories, vocab))
    }

    pub fn add_binary(&mut self, pos: Position, parent: usize, left: usize, right: usize, n: F) {
        self.entry(pos).add_binary(parent, left, right, n);
    }

    pub fn add_terminal(&mut self, pos: Position, parent: usize, word: usize, n: F) {
        self.entry(pos).add_terminal(parent, word, n);
    }

    pub fn positions(&self) -> impl Iterator<Item = (&Position, &CountMatrix<F>)> {
        self.counts.iter()
    }
}

/// Removes side/depth specificity: plain counts are the per-position
/// counts summed over positions (children are identified by category alone;
/// their positions are implied by the parent's and carry no extra
/// information).
pub fn project_counts<F: Real>(bounded: &PositionCounts<F>) -> CountMatrix<F> {
    let mut plain = CountMatrix::zeros(bounded.categories, bounded.vocab);
    for (_, m) in bounded.positions() {
        for parent in 0..bounded.categories {
            for left in 0..bounded.categories {
                for right in 0..bounded.categories {
                    let n = m.binary_count(parent, left, right);
                    if n != F::zero() {
                        plain.add_binary(parent, left, right, n);
                    }
                }
            }
            for word in 0..bounded.vocab {
                let n = m.terminal_count(parent, word);
                if n != F::zero() {
                    plain.add_terminal(parent, word, n);
                }
            }
        }
    }
    plain
}

/// Annotated category token for bounded grammar files: `c2@L1`.
pub fn bounded_token(cat: usize, pos: Position) -> String {
    format!("{}@{}", CategorySet::token(cat), pos)
}

/// Writes a bounded grammar in the rule-per-line format, with parent and
/// child categories carrying `@<side><depth>` annotations (child positions
/// follow from the parent's). Only usable rows and nonzero rules appear.
pub fn write_bounded_grammar<F: Real, W: Write>(
    bg: &BoundedGrammar<F>,
    vocab: &Vocabulary,
    out: &mut W,
) -> Result<()> {
    if vocab.len() != bg.vocab_size() {
        return Err(Error::param(format!(
            "vocabulary has {} words but grammar expects {}",
            vocab.len(),
            bg.vocab_size()
        )));
    }
    let c = bg.categories();
    writeln!(out, "categories\t{c}")?;
    writeln!(out, "depth\t{}", bg.max_depth())?;
    writeln!(out, "vocab\t{}", vocab.words().join(" "))?;
    for pos in all_positions(bg.max_depth()) {
        let (pl, pr) = child_positions(pos);
        for parent in 0..c {
            if !bg.is_usable(pos, parent) {
                continue;
            }
            let ptok = bounded_token(parent, pos);
            for left in 0..c {
                for right in 0..c {
                    let p = bg.binary_prob(pos, parent, left, right);
                    if p != F::zero() {
                        writeln!(
                            out,
                            "{ptok}\t{}\t{}\t{}",
                            bounded_token(left, pl),
                            bounded_token(right, pr),
                            crate::grammar::format_prob(p)
                        )?;
                    }
                }
            }
            for word in 0..vocab.len() {
                let p = bg.terminal_prob(pos, parent, word);
                if p != F::zero() {
                    writeln!(
                        out,
                        "{ptok}\t{}\t-\t{}",
                        vocab.word(word),
                        crate::grammar::format_prob(p)
                    )?;
                }
            }
        }
    }
    Ok(())
}
