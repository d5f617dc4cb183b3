//! Inside charts and exact posterior tree sampling.
//!
//! A chart grammar flattens either a plain grammar or a bounded grammar
//! into one dense rule table over "chart symbols" (plain categories, or
//! (position, category) pairs), so the inside pass and the sampler are the
//! same code for both. Cell values are kept in linear space with a
//! per-cell log scale factor, so the split-point sum stays a pure dense
//! product while arbitrarily small likelihoods remain representable.

use ndarray::{s, Array1, Array2, Array3, ArrayView1};
use rand::Rng;

use crate::bounding::{child_positions, all_positions, BoundedGrammar, Position};
use crate::error::{Error, Result};
use crate::grammar::{CategorySet, Grammar, Vocabulary};
use crate::num::Real;
use crate::treebank::Tree;

/// A grammar in chart form: a dense binary table (rows = parent symbol,
/// columns = left·S + right) and a terminal table, plus the decoding from
/// chart symbols back to plain categories and positions.
#[derive(Clone, Debug)]
pub struct ChartGrammar<F> {
    size: usize,
    vocab: usize,
    binary: Array2<F>,
    terminal: Array2<F>,
    root: usize,
    symbols: Vec<SymbolInfo>,
}

/// What a chart symbol stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymbolInfo {
    pub category: usize,
    pub position: Option<Position>,
}

impl<F: Real> ChartGrammar<F> {
    /// Chart form of a plain grammar: symbols are the categories
    /// themselves and the tables are copies of the grammar blocks.
    pub fn from_plain(g: &Grammar<F>) -> ChartGrammar<F> {
        let symbols = (0..g.categories())
            .map(|category| SymbolInfo {
                category,
                position: None,
            })
            .collect();
        ChartGrammar {
            size: g.categories(),
            vocab: g.vocab_size(),
            binary: g.binary_block().to_owned(),
            terminal: g.terminal_block().to_owned(),
            root: CategorySet::TOP,
            symbols,
        }
    }

    /// Chart form of a bounded grammar: symbols are (position, category)
    /// pairs, child symbols carry the positions dictated by the parent's,
    /// and the root symbol is (R,0,T).
    pub fn from_bounded(bg: &BoundedGrammar<F>) -> Result<ChartGrammar<F>> {
        if !bg.is_usable(Position::ROOT, CategorySet::TOP) {
            return Err(Error::DegenerateGrammar(
                "the start category cannot generate any bounded yield".into(),
            ));
        }
        let idx = *bg.index();
        let s = idx.len();
        let c = idx.categories();
        let w = bg.vocab_size();
        let mut binary: Array2<F> = Array2::zeros((s, s * s));
        let mut terminal: Array2<F> = Array2::zeros((s, w));
        let mut symbols = vec![
            SymbolInfo {
                category: CategorySet::TOP,
                position: Some(Position::ROOT),
            };
            s
        ];
        for pos in all_positions(idx.max_depth()) {
            let (pl, pr) = child_positions(pos);
            for cat in 0..c {
                let Some(sym) = idx.id(pos, cat) else { continue };
                symbols[sym] = SymbolInfo {
                    category: cat,
                    position: Some(pos),
                };
                if !bg.is_usable(pos, cat) {
                    continue;
                }
                for a in 0..c {
                    let Some(la) = idx.id(pl, a) else { continue };
                    for b in 0..c {
                        let Some(rb) = idx.id(pr, b) else { continue };
                        let p = bg.binary_prob(pos, cat, a, b);
                        if p != F::zero() {
                            binary[[sym, la * s + rb]] = p;
                        }
                    }
                }
                for word in 0..w {
                    let p = bg.terminal_prob(pos, cat, word);
                    if p != F::zero() {
                        terminal[[sym, word]] = p;
                    }
                }
            }
        }
        Ok(ChartGrammar {
            size: s,
            vocab: w,
            binary,
            terminal,
            root: idx.root(),
            symbols,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn symbol(&self, sym: usize) -> SymbolInfo {
        self.symbols[sym]
    }

    /// Text label for a chart symbol: `c3` plain, `c3@L2` bounded.
    pub fn label(&self, sym: usize) -> String {
        let info = self.symbols[sym];
        match info.position {
            None => CategorySet::token(info.category),
            Some(pos) => format!("{}@{pos}", CategorySet::token(info.category)),
        }
    }

    pub fn binary_prob(&self, parent: usize, left: usize, right: usize) -> F {
        self.binary[[parent, left * self.size + right]]
    }

    pub fn terminal_prob(&self, parent: usize, word: usize) -> F {
        self.terminal[[parent, word]]
    }

    fn root_has_mass(&self) -> bool {
        self.binary.row(self.root).iter().any(|&p| p > F::zero())
            || self.terminal.row(self.root).iter().any(|&p| p > F::zero())
    }
}

/// Which split-point summation to run. Both produce the same chart up to
/// float rounding; the naive triple loop is the oracle, the batched path
/// does one matrix product per cell over contiguous slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BuildPath {
    Naive,
    #[default]
    Batched,
}

/// Inside chart for one sentence: `values(i,j)` times `exp(scale_log(i,j))`
/// is the true inside likelihood of span (i,j) per chart symbol.
#[derive(Clone, Debug)]
pub struct InsideChart<F> {
    len: usize,
    size: usize,
    root: usize,
    tokens: Vec<u32>,
    v: Array3<F>,
    v_rev: Array3<F>,
    scale: Array2<F>,
}

impl<F: Real> InsideChart<F> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn chart_size(&self) -> usize {
        self.size
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn values(&self, i: usize, j: usize) -> ArrayView1<'_, F> {
        self.v.slice(s![i, j, ..])
    }

    pub fn scale_log(&self, i: usize, j: usize) -> F {
        self.scale[[i, j]]
    }

    /// Log likelihood of the whole sentence: log of the root cell's start
    /// symbol plus the accumulated scale. Negative infinity if the
    /// sentence has no parse.
    pub fn log_likelihood(&self) -> F {
        let root = self.v[[0, self.len, self.root]];
        if root > F::zero() {
            root.ln() + self.scale[[0, self.len]]
        } else {
            F::neg_infinity()
        }
    }
}

/// Per-split scaling decisions for one cell, shared verbatim by the two
/// build paths and by the sampler so all three see identical weights.
///
/// Each split k contributes grammar · (V(i,k) ⊗ V(k,j)), which in stored
/// terms carries the factor exp(scale(i,k) + scale(k,j)). Working relative
/// to the *largest split magnitude* — scale sum plus the log of the two
/// stored cell maxima — keeps every term's entries within [0,1] after
/// dividing the children by their maxima, so nothing overflows and any
/// term small enough to underflow is below 5e-44 of the leading term's
/// guaranteed floor (doubles bottom out near e^-745, and each normalized
/// child keeps its maximum at exactly 1).
struct SplitScales<F> {
    /// Reference log magnitude for the cell (−∞ if no split is live).
    frame: F,
    /// Per split: None if dead, else the factor pair (left multiplier,
    /// right multiplier) applied to the stored child vectors.
    factors: Vec<Option<(F, F)>>,
}

fn split_scales<F: Real>(chart: &InsideChart<F>, i: usize, j: usize) -> SplitScales<F> {
    let mut mags = Vec::with_capacity(j - i - 1);
    let mut frame = F::neg_infinity();
    for k in i + 1..j {
        let m1 = max_entry(chart.values(i, k));
        let m2 = max_entry(chart.values(k, j));
        if m1 > F::zero() && m2 > F::zero() {
            let mag = chart.scale[[i, k]] + chart.scale[[k, j]] + m1.ln() + m2.ln();
            if mag > frame {
                frame = mag;
            }
            mags.push(Some((m1, m2, mag)));
        } else {
            mags.push(None);
        }
    }
    let factors = mags
        .into_iter()
        .map(|slot| {
            slot.map(|(m1, m2, mag)| {
                // exp(mag - frame) ≤ 1: folded into the left child.
                ((mag - frame).exp() / m1, F::one() / m2)
            })
        })
        .collect();
    SplitScales { frame, factors }
}

fn max_entry<F: Real>(v: ArrayView1<'_, F>) -> F {
    v.iter().copied().fold(F::zero(), |m, x| if x > m { x } else { m })
}

/// Builds the inside chart for `tokens` under `g`.
pub fn build_inside_chart<F: Real>(
    g: &ChartGrammar<F>,
    tokens: &[u32],
    path: BuildPath,
) -> Result<InsideChart<F>> {
    if tokens.is_empty() {
        return Err(Error::data("cannot build a chart for an empty sentence"));
    }
    if !g.root_has_mass() {
        return Err(Error::DegenerateGrammar(
            "start symbol has no expansions".into(),
        ));
    }
    for (pos, &t) in tokens.iter().enumerate() {
        if t as usize >= g.vocab {
            return Err(Error::data(format!(
                "token id {t} at position {pos} is outside the vocabulary (size {})",
                g.vocab
            )));
        }
    }

    let l = tokens.len();
    let s = g.size;
    let mut chart = InsideChart {
        len: l,
        size: s,
        root: g.root,
        tokens: tokens.to_vec(),
        v: Array3::zeros((l + 1, l + 1, s)),
        v_rev: Array3::zeros((l + 1, l + 1, s)),
        scale: Array2::zeros((l + 1, l + 1)),
    };

    for (i, &t) in tokens.iter().enumerate() {
        let col = g.terminal.column(t as usize);
        chart.v.slice_mut(s![i, i + 1, ..]).assign(&col);
        chart.v_rev.slice_mut(s![i + 1, i, ..]).assign(&col);
    }

    let mut cell = Array1::zeros(s);
    for width in 2..=l {
        for i in 0..=l - width {
            let j = i + width;
            let scales = split_scales(&chart, i, j);
            cell.fill(F::zero());
            if scales.frame > F::neg_infinity() {
                match path {
                    BuildPath::Naive => naive_cell(g, &chart, i, j, &scales, &mut cell),
                    BuildPath::Batched => batched_cell(g, &chart, i, j, &scales, &mut cell),
                }
            }
            store_cell(&mut chart, i, j, scales.frame, &cell);
        }
    }
    Ok(chart)
}

/// Normalizes and writes one finished cell (and its reversed copy). The
/// cell is renormalized to a unit maximum when the raw maximum leaves
/// [1e-200, 1]; the lower trigger is the underflow guard, the upper keeps
/// stored values within [0,1] when a multi-split sum exceeds its leading
/// term.
fn store_cell<F: Real>(chart: &mut InsideChart<F>, i: usize, j: usize, frame: F, cell: &Array1<F>) {
    let m = max_entry(cell.view());
    if m == F::zero() {
        chart.scale[[i, j]] = F::zero();
        return; // cells start zeroed
    }
    let (values, scale) = if m < F::RESCALE_THRESHOLD || m > F::one() {
        (cell.mapv(|x| x / m), frame + m.ln())
    } else {
        (cell.clone(), frame)
    };
    chart.scale[[i, j]] = scale;
    chart.v.slice_mut(s![i, j, ..]).assign(&values);
    chart.v_rev.slice_mut(s![j, i, ..]).assign(&values);
}

/// Oracle path: explicit loops over split, parent, and child pair.
fn naive_cell<F: Real>(
    g: &ChartGrammar<F>,
    chart: &InsideChart<F>,
    i: usize,
    j: usize,
    scales: &SplitScales<F>,
    out: &mut Array1<F>,
) {
    let s = g.size;
    for (k, slot) in (i + 1..j).zip(&scales.factors) {
        let Some((fl, fr)) = *slot else { continue };
        let left = chart.values(i, k);
        let right = chart.values(k, j);
        for parent in 0..s {
            let row = g.binary.row(parent);
            let mut acc = F::zero();
            for a in 0..s {
                let va = left[a] * fl;
                if va == F::zero() {
                    continue;
                }
                for b in 0..s {
                    let vb = right[b];
                    if vb == F::zero() {
                        continue;
                    }
                    acc = acc + row[a * s + b] * va * vb * fr;
                }
            }
            out[parent] = out[parent] + acc;
        }
    }
}

/// Batched path: the split-point sum for the whole cell is one matrix
/// product M1ᵀ·M2 over contiguous row blocks of the chart and its
/// reversed copy, followed by one product with the binary rule table.
fn batched_cell<F: Real>(
    g: &ChartGrammar<F>,
    chart: &InsideChart<F>,
    i: usize,
    j: usize,
    scales: &SplitScales<F>,
    out: &mut Array1<F>,
) {
    let s = g.size;
    let mut m1 = chart.v.slice(s![i, i + 1..j, ..]).to_owned();
    let mut m2 = chart.v_rev.slice(s![j, i + 1..j, ..]).to_owned();
    for (k, slot) in (0..j - i - 1).zip(&scales.factors) {
        match *slot {
            Some((fl, fr)) => {
                m1.row_mut(k).mapv_inplace(|x| x * fl);
                m2.row_mut(k).mapv_inplace(|x| x * fr);
            }
            None => {
                m1.row_mut(k).fill(F::zero());
                m2.row_mut(k).fill(F::zero());
            }
        }
    }
    let pairs = m1.t().dot(&m2); // S×S: Σ_k left[a]·right[b]
    let flat = pairs
        .into_shape_with_order(s * s)
        .expect("S×S reshapes to S²");
    out.assign(&g.binary.dot(&flat));
}

/// A tree drawn from the exact posterior over parses.
#[derive(Clone, Debug)]
pub struct SampledTree {
    /// Binary tree whose internal labels are chart symbol labels and
    /// whose leaves are the sentence's words.
    pub tree: Tree,
    /// Log posterior weight of this draw, ln P(tree | sentence, grammar).
    pub log_prob: f64,
}

/// Samples one parse from P(tree | grammar, sentence) by walking the
/// chart top-down. At each constituent the split point and child label
/// pair are drawn together: one uniform draw against the cumulative sum
/// of grammar·(V(i,k) ⊗ V(k,j)) in (k, left, right) ascending order, the
/// same weights (and scaling) the chart builder used.
pub fn sample_tree<F: Real, R: Rng + ?Sized>(
    chart: &InsideChart<F>,
    g: &ChartGrammar<F>,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<SampledTree> {
    if chart.chart_size() != g.size {
        return Err(Error::param(
            "chart was built under a different grammar shape",
        ));
    }
    if vocab.len() != g.vocab {
        return Err(Error::param("vocabulary does not match the grammar"));
    }
    if chart.log_likelihood() == F::neg_infinity() {
        return Err(Error::Sampling(
            "sentence has no parse under this grammar".into(),
        ));
    }
    let mut log_rules = F::zero();
    let tree = sample_node(chart, g, vocab, rng, 0, chart.len(), g.root, &mut log_rules)?;
    let log_prob = (log_rules - chart.log_likelihood()).to_f64_lossy();
    Ok(SampledTree { tree, log_prob })
}

fn sample_node<F: Real, R: Rng + ?Sized>(
    chart: &InsideChart<F>,
    g: &ChartGrammar<F>,
    vocab: &Vocabulary,
    rng: &mut R,
    i: usize,
    j: usize,
    sym: usize,
    log_rules: &mut F,
) -> Result<Tree> {
    if j - i == 1 {
        let word = chart.tokens()[i];
        let p = g.terminal_prob(sym, word as usize);
        if !(p > F::zero()) {
            return Err(Error::Sampling(format!(
                "no terminal rule for {} over '{}'",
                g.label(sym),
                vocab.word(word as usize)
            )));
        }
        *log_rules = *log_rules + p.ln();
        return Ok(Tree::node(
            g.label(sym),
            vec![Tree::leaf(vocab.word(word as usize))],
        ));
    }

    let scales = split_scales(chart, i, j);
    let Scan::Total(total) = outcome_scan(chart, g, i, j, sym, &scales, None) else {
        return Err(Error::Internal("scan without target must return a total".into()));
    };
    if !(total > F::zero()) {
        return Err(Error::Sampling(format!(
            "no expansion has mass for {} over span {i}..{j}",
            g.label(sym)
        )));
    }
    let target = F::sample_unit(rng) * total;
    let picked = outcome_scan(chart, g, i, j, sym, &scales, Some(target));
    // The scan already clamps to the last positive outcome, so a miss here
    // means the cell had mass in total but none per outcome — impossible.
    let (k, a, b) = picked_outcome(picked)?;
    *log_rules = *log_rules + g.binary_prob(sym, a, b).ln();
    let left = sample_node(chart, g, vocab, rng, i, k, a, log_rules)?;
    let right = sample_node(chart, g, vocab, rng, k, j, b, log_rules)?;
    Ok(Tree::node(g.label(sym), vec![left, right]))
}

enum Scan<F> {
    Total(F),
    Hit(usize, usize, usize),
    Nothing,
}

fn picked_outcome<F>(scan: Scan<F>) -> Result<(usize, usize, usize)> {
    match scan {
        Scan::Hit(k, a, b) => Ok((k, a, b)),
        _ => Err(Error::Internal(
            "cumulative scan found no outcome despite positive total".into(),
        )),
    }
}

/// One pass over the outcomes of cell (i,j) for `sym`, in (k, a, b)
/// ascending order. Without a target it returns the total; with one it
/// returns the outcome where the cumulative sum first reaches the target,
/// clamping to the last positive outcome against rounding at the far end.
fn outcome_scan<F: Real>(
    chart: &InsideChart<F>,
    g: &ChartGrammar<F>,
    i: usize,
    j: usize,
    sym: usize,
    scales: &SplitScales<F>,
    target: Option<F>,
) -> Scan<F> {
    let s = g.size;
    let row = g.binary.row(sym);
    let mut cum = F::zero();
    let mut last_positive = None;
    for (k, slot) in (i + 1..j).zip(&scales.factors) {
        let Some((fl, fr)) = *slot else { continue };
        let left = chart.values(i, k);
        let right = chart.values(k, j);
        for a in 0..s {
            let va = left[a] * fl;
            if va == F::zero() {
                continue;
            }
            for b in 0..s {
                let w = row[a * s + b] * va * right[b] * fr;
                if w > F::zero() {
                    cum = cum + w;
                    last_positive = Some((k, a, b));
                    if let Some(t) = target {
                        if cum >= t {
                            return Scan::Hit(k, a, b);
                        }
                    }
                }
            }
        }
    }
    match (target, last_positive) {
        (None, _) => Scan::Total(cum),
        (Some(_), Some((k, a, b))) => Scan::Hit(k, a, b),
        (Some(_), None) => Scan::Nothing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounding::{bound_grammar, compute_containment};
    use crate::grammar::sample_prior_grammar;
    use crate::rng::{domain, stream};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::RngExt;
    use statrs::function::gamma::ln_gamma;

    fn toy() -> Grammar<f64> {
        Grammar::from_probs(1, 1, array![[0.4, 0.6]]).unwrap()
    }

    #[test]
    fn width_one_cells_hold_terminal_probs() {
        let g = ChartGrammar::from_plain(&toy());
        let chart = build_inside_chart(&g, &[0], BuildPath::Batched).unwrap();
        assert_eq!(chart.values(0, 1)[0], 0.6);
        assert_eq!(chart.scale_log(0, 1), 0.0);
        assert_abs_diff_eq!(chart.log_likelihood(), 0.6f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn two_word_sentence_matches_enumeration() {
        let g = ChartGrammar::from_plain(&toy());
        for path in [BuildPath::Naive, BuildPath::Batched] {
            let chart = build_inside_chart(&g, &[0, 0], path).unwrap();
            // Single parse: c -> c c, both children c -> w.
            let true_value = chart.values(0, 2)[0] * chart.scale_log(0, 2).exp();
            assert_abs_diff_eq!(true_value, 0.4 * 0.6 * 0.6, epsilon = 1e-15);
            assert_abs_diff_eq!(chart.log_likelihood(), 0.144f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn no_terminal_mass_means_unparsable() {
        let g = Grammar::from_probs(1, 1, array![[1.0, 0.0]]).unwrap();
        let cg = ChartGrammar::from_plain(&g);
        let chart = build_inside_chart(&cg, &[0, 0], BuildPath::Batched).unwrap();
        assert_eq!(chart.log_likelihood(), f64::NEG_INFINITY);
        let vocab = Vocabulary::new(vec!["w".into()]).unwrap();
        let mut rng = stream(1, domain::AUX, &[0]);
        assert!(matches!(
            sample_tree(&chart, &cg, &vocab, &mut rng),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn unknown_token_is_a_data_error() {
        let g = ChartGrammar::from_plain(&toy());
        let err = build_inside_chart(&g, &[0, 7], BuildPath::Batched).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "got {err:?}");
    }

    #[test]
    fn naive_and_batched_paths_agree() {
        // Quick version of the 1000-case property suite: random grammars,
        // random sentences, per-entry relative agreement. Tolerance 1e-12
        // as both paths sum the same nonnegative terms, so they can differ
        // only by reassociation — a few ULPs per entry, far inside 1e-12.
        for case in 0..50u64 {
            let c = 2 + (case % 3) as usize;
            let w = 2 + (case % 2) as usize;
            let g = sample_prior_grammar::<f64>(c, w, 0.5, 100 + case).unwrap();
            let cg = ChartGrammar::from_plain(&g);
            let mut rng = stream(7, domain::AUX, &[case]);
            let len = 2 + (case as usize % 7);
            let tokens: Vec<u32> = (0..len).map(|_| rng.random_range(0..w as u32)).collect();
            let naive = build_inside_chart(&cg, &tokens, BuildPath::Naive).unwrap();
            let batched = build_inside_chart(&cg, &tokens, BuildPath::Batched).unwrap();
            for i in 0..len {
                for j in i + 1..=len {
                    for sym in 0..c {
                        let a = naive.values(i, j)[sym].ln() + naive.scale_log(i, j);
                        let b = batched.values(i, j)[sym].ln() + batched.scale_log(i, j);
                        if a.is_finite() || b.is_finite() {
                            assert!(
                                (a - b).abs() < 1e-12,
                                "case {case} cell ({i},{j})[{sym}]: {a} vs {b}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rescaling_survives_long_low_probability_sentences() {
        // 1-category grammar, P(c→c c)=1e-3, P(c→w)=0.999. Every binary
        // tree over L words uses L-1 binary and L terminal rules, so the
        // inside value of the whole sentence has the closed form
        // Catalan(L-1) · (1e-3)^(L-1) · 0.999^L — around e^-836 for
        // L=150, far below what unscaled doubles can hold.
        let g = Grammar::from_probs(1, 1, array![[1e-3, 0.999]]).unwrap();
        let cg = ChartGrammar::from_plain(&g);
        let l = 150usize;
        let tokens = vec![0u32; l];
        let n = (l - 1) as f64;
        let ln_catalan = ln_gamma(2.0 * n + 1.0) - ln_gamma(n + 1.0) - ln_gamma(n + 2.0);
        let expected = ln_catalan + n * 1e-3f64.ln() + l as f64 * 0.999f64.ln();
        for path in [BuildPath::Naive, BuildPath::Batched] {
            let chart = build_inside_chart(&cg, &tokens, path).unwrap();
            // ~L³/6 fused accumulations plus one ln/exp pair per cell keep
            // the relative error near 1e-13; 1e-9 absolute on a value of
            // magnitude 836 is a relative tolerance of ~1e-12.
            assert_abs_diff_eq!(chart.log_likelihood(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_word_tree_is_certain() {
        let g = ChartGrammar::from_plain(&toy());
        let chart = build_inside_chart(&g, &[0], BuildPath::Batched).unwrap();
        let vocab = Vocabulary::new(vec!["w".into()]).unwrap();
        let mut rng = stream(3, domain::AUX, &[]);
        let s = sample_tree(&chart, &g, &vocab, &mut rng).unwrap();
        assert_eq!(s.tree, Tree::node("c0", vec![Tree::leaf("w")]));
        assert_abs_diff_eq!(s.log_prob, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn three_word_parses_are_equally_likely() {
        // "w w w" under the toy grammar has exactly two parses (left and
        // right branching), symmetric, so each has posterior 1/2. With
        // 2000 draws the count is Binomial(2000, 0.5): sd ≈ 22.4, so ±90
        // (4 sd) fails a correct sampler with probability < 1e-4.
        let g = ChartGrammar::from_plain(&toy());
        let chart = build_inside_chart(&g, &[0, 0, 0], BuildPath::Batched).unwrap();
        let vocab = Vocabulary::new(vec!["w".into()]).unwrap();
        let mut rng = stream(11, domain::AUX, &[42]);
        let mut left_branching = 0u32;
        for _ in 0..2000 {
            let s = sample_tree(&chart, &g, &vocab, &mut rng).unwrap();
            let Tree::Node { children, .. } = &s.tree else {
                panic!("expected a binary root")
            };
            if !children[0].is_leaf() && children[0].num_leaves() == 2 {
                left_branching += 1;
            }
            // Posterior weight of either parse is exactly 1/2.
            assert_abs_diff_eq!(s.log_prob, 0.5f64.ln(), epsilon = 1e-12);
        }
        assert!(
            (left_branching as i64 - 1000).abs() < 90,
            "left-branching count {left_branching} outside 1000±90"
        );
    }

    #[test]
    fn bounded_chart_parses_and_labels() {
        let g = toy();
        let h = compute_containment(&g, 1, 40).unwrap();
        let bg = bound_grammar(&g, &h).unwrap();
        let cg = ChartGrammar::from_bounded(&bg).unwrap();
        assert_eq!(cg.size(), 4); // (R,0,c0), (L,1..2,c0), (R,1,c0)
        assert_eq!(cg.label(cg.root()), "c0@R0");

        let chart = build_inside_chart(&cg, &[0, 0], BuildPath::Batched).unwrap();
        // The one parse puts the left word at (L,1) and the right at
        // (R,0): P = b((R,0): c→c c) · t((L,1), w) · t((R,0), w).
        let expected = cg.binary_prob(cg.root(), 1, 0)
            * cg.terminal_prob(1, 0)
            * cg.terminal_prob(0, 0);
        assert_abs_diff_eq!(chart.log_likelihood(), expected.ln(), epsilon = 1e-12);

        let vocab = Vocabulary::new(vec!["w".into()]).unwrap();
        let mut rng = stream(5, domain::AUX, &[1]);
        let s = sample_tree(&chart, &cg, &vocab, &mut rng).unwrap();
        assert_eq!(
            s.tree,
            Tree::node(
                "c0@R0",
                vec![
                    Tree::node("c0@L1", vec![Tree::leaf("w")]),
                    Tree::node("c0@R0", vec![Tree::leaf("w")]),
                ]
            )
        );
        assert_abs_diff_eq!(s.log_prob, 0.0, epsilon = 1e-12); // unique parse
    }

    #[test]
    fn degenerate_bounded_root_is_rejected() {
        // c0 only ever recurses, so T generates no bounded yield at all.
        let probs = array![
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], // c0 -> c0 c0
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0], // c1 -> w
        ];
        let g = Grammar::from_probs(2, 2, probs).unwrap();
        let h = compute_containment(&g, 1, 20).unwrap();
        let bg = bound_grammar(&g, &h).unwrap();
        assert!(matches!(
            ChartGrammar::from_bounded(&bg),
            Err(Error::DegenerateGrammar(_))
        ));
    }
}
