//! Shared oracles for the integration suites: exhaustive tree
//! enumeration, shape-level probability DP, and distribution distances.
//! Everything here is deliberately independent of the library's chart
//! machinery — plain recursion over trees — so agreement is evidence,
//! not circularity.

use std::collections::BTreeMap;

use pcfg_induce::chart::ChartGrammar;
use pcfg_induce::grammar::Vocabulary;
use pcfg_induce::treebank::Tree;

/// Unlabeled binary tree shape over `n` leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    Leaf,
    Node(Box<Shape>, Box<Shape>),
}

impl Shape {
    pub fn leaves(&self) -> usize {
        match self {
            Shape::Leaf => 1,
            Shape::Node(l, r) => l.leaves() + r.leaves(),
        }
    }

    /// Left-corner depth of the shape, counted the same way the library
    /// counts tree depth but computed by an independent recursion: a
    /// binary node needs one stack element, and expanding the left child
    /// of a right child needs one more.
    pub fn left_corner_depth(&self) -> usize {
        fn rec(shape: &Shape, is_left: bool, depth: usize) -> usize {
            match shape {
                Shape::Leaf => 0,
                Shape::Node(l, r) => {
                    let left_depth = if is_left { depth } else { depth + 1 };
                    depth
                        .max(1)
                        .max(rec(l, true, left_depth))
                        .max(rec(r, false, depth))
                }
            }
        }
        rec(self, false, 0)
    }
}

/// Every binary shape over `n` leaves (the Catalan family).
pub fn all_shapes(n: usize) -> Vec<Shape> {
    assert!(n >= 1);
    if n == 1 {
        return vec![Shape::Leaf];
    }
    let mut shapes = Vec::new();
    for split in 1..n {
        for left in all_shapes(split) {
            for right in all_shapes(n - split) {
                shapes.push(Shape::Node(Box::new(left.clone()), Box::new(right)));
            }
        }
    }
    shapes
}

/// Total probability, under `g`, of all symbol-labeled trees with this
/// shape over `tokens`, rooted at the grammar's start symbol. Computed
/// by a per-node DP over symbols: P(node, s) = Σ_{a,b} g(s→ab)·P(l,a)·P(r,b).
pub fn shape_probability(g: &ChartGrammar<f64>, tokens: &[u32], shape: &Shape) -> f64 {
    fn table(g: &ChartGrammar<f64>, tokens: &[u32], shape: &Shape, start: usize) -> Vec<f64> {
        match shape {
            Shape::Leaf => (0..g.size())
                .map(|s| g.terminal_prob(s, tokens[start] as usize))
                .collect(),
            Shape::Node(l, r) => {
                let lt = table(g, tokens, l, start);
                let rt = table(g, tokens, r, start + l.leaves());
                (0..g.size())
                    .map(|s| {
                        let mut total = 0.0;
                        for (a, &la) in lt.iter().enumerate() {
                            if la == 0.0 {
                                continue;
                            }
                            for (b, &rb) in rt.iter().enumerate() {
                                total += g.binary_prob(s, a, b) * la * rb;
                            }
                        }
                        total
                    })
                    .collect()
            }
        }
    }
    assert_eq!(shape.leaves(), tokens.len());
    table(g, tokens, shape, 0)[g.root()]
}

/// All fully labeled trees over `tokens` rooted at the start symbol,
/// with their exact probabilities. Trees are rendered the way the
/// sampler renders them (symbol labels, preterminal over each word), so
/// bracketed strings are directly comparable. Exponential — keep the
/// grammar and sentence small.
pub fn enumerate_trees(
    g: &ChartGrammar<f64>,
    tokens: &[u32],
    vocab: &Vocabulary,
) -> Vec<(Tree, f64)> {
    fn span(
        g: &ChartGrammar<f64>,
        tokens: &[u32],
        vocab: &Vocabulary,
        i: usize,
        j: usize,
        s: usize,
    ) -> Vec<(Tree, f64)> {
        if j - i == 1 {
            let p = g.terminal_prob(s, tokens[i] as usize);
            if p == 0.0 {
                return Vec::new();
            }
            let word = vocab.word(tokens[i] as usize);
            return vec![(Tree::node(g.label(s), vec![Tree::leaf(word)]), p)];
        }
        let mut out = Vec::new();
        for k in i + 1..j {
            for a in 0..g.size() {
                let lefts = span(g, tokens, vocab, i, k, a);
                if lefts.is_empty() {
                    continue;
                }
                for b in 0..g.size() {
                    let rule = g.binary_prob(s, a, b);
                    if rule == 0.0 {
                        continue;
                    }
                    let rights = span(g, tokens, vocab, k, j, b);
                    for (lt, lp) in &lefts {
                        for (rt, rp) in &rights {
                            out.push((
                                Tree::node(g.label(s), vec![lt.clone(), rt.clone()]),
                                rule * lp * rp,
                            ));
                        }
                    }
                }
            }
        }
        out
    }
    span(g, tokens, vocab, 0, tokens.len(), g.root())
}

/// Total variation distance between two distributions over tree strings.
pub fn total_variation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
