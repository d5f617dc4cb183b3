//! Grammar representation and Dirichlet resampling.
//!
//! A grammar over C categories and W words is a row-stochastic matrix with
//! one row per parent category and one column per expansion outcome: first
//! the C^2 ordered child pairs (pair (a, b) at column `a*C + b`), then the W
//! words. Category 0 is the start symbol and is written `c0` in files.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::{self, domain};

/// Interned word list; ids are dense and order-of-first-appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(|c| c.is_whitespace()) {
                return Err(Error::data(format!("invalid vocabulary entry {:?}", w)));
            }
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::data(format!("duplicate vocabulary entry {:?}", w)));
            }
        }
        Ok(Vocabulary { words, index })
    }

    /// Builds a vocabulary from a token stream, deduplicating in order.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words = Vec::new();
        let mut index = HashMap::new();
        for t in tokens {
            if !index.contains_key(t) {
                index.insert(t.to_owned(), words.len() as u32);
                words.push(t.to_owned());
            }
        }
        Vocabulary { words, index }
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| i as usize)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// The category inventory: categories are plain indices `0..count`, written
/// as `c<index>`. Index 0 is the start symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CategorySet {
    count: usize,
}

impl CategorySet {
    pub const TOP: usize = 0;

    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("category count must be at least 1"));
        }
        Ok(CategorySet { count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn token(index: usize) -> String {
        format!("c{index}")
    }

    /// Parses `c<digits>`; enforces membership when a count is known.
    pub fn parse_token(&self, tok: &str) -> Option<usize> {
        let idx = parse_category_token(tok)?;
        (idx < self.count).then_some(idx)
    }
}

pub fn parse_category_token(tok: &str) -> Option<usize> {
    let digits = tok.strip_prefix('c')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Row-stochastic rule probabilities for one grammar.
#[derive(Clone, Debug, PartialEq)]
pub struct Grammar<F> {
    categories: usize,
    vocab: usize,
    probs: Array2<F>,
}

impl<F: Real> Grammar<F> {
    /// Wraps a probability matrix, validating shape and row-stochasticity.
    pub fn from_probs(categories: usize, vocab: usize, probs: Array2<F>) -> Result<Self> {
        if categories == 0 {
            return Err(Error::param("grammar needs at least one category"));
        }
        if vocab == 0 {
            return Err(Error::param("grammar needs a nonempty vocabulary"));
        }
        let cols = categories * categories + vocab;
        if probs.shape() != [categories, cols] {
            return Err(Error::param(format!(
                "probability matrix shape {:?} does not match {} x {}",
                probs.shape(),
                categories,
                cols
            )));
        }
        for (r, row) in probs.rows().into_iter().enumerate() {
            let mut sum = F::zero();
            for &v in row {
                if !v.is_finite() || v < F::zero() {
                    return Err(Error::data(format!(
                        "probability for category {r} is not a finite nonnegative number"
                    )));
                }
                sum = sum + v;
            }
            if (sum - F::one()).abs() > F::ROW_SUM_TOL {
                return Err(Error::data(format!(
                    "row for category {r} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Grammar {
            categories,
            vocab,
            probs,
        })
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn num_outcomes(&self) -> usize {
        self.categories * self.categories + self.vocab
    }

    pub fn pair_col(&self, left: usize, right: usize) -> usize {
        debug_assert!(left < self.categories && right < self.categories);
        left * self.categories + right
    }

    pub fn word_col(&self, word: usize) -> usize {
        debug_assert!(word < self.vocab);
        self.categories * self.categories + word
    }

    pub fn binary_prob(&self, parent: usize, left: usize, right: usize) -> F {
        self.probs[[parent, self.pair_col(left, right)]]
    }

    pub fn terminal_prob(&self, parent: usize, word: usize) -> F {
        self.probs[[parent, self.word_col(word)]]
    }

    pub fn probs(&self) -> &Array2<F> {
        &self.probs
    }

    /// The C x C^2 block of child-pair probabilities.
    pub fn binary_block(&self) -> ArrayView2<'_, F> {
        self.probs.slice(s![.., ..self.categories * self.categories])
    }

    /// The C x W block of word-emission probabilities.
    pub fn terminal_block(&self) -> ArrayView2<'_, F> {
        self.probs.slice(s![.., self.categories * self.categories..])
    }

    /// Total emission probability per category.
    pub fn terminal_mass(&self, parent: usize) -> F {
        self.terminal_block().row(parent).iter().copied().sum()
    }
}

/// Rule-occurrence counts, aligned column-for-column with [`Grammar`].
#[derive(Clone, Debug, PartialEq)]
pub struct CountMatrix<F> {
    categories: usize,
    vocab: usize,
    counts: Array2<F>,
}

impl<F: Real> CountMatrix<F> {
    pub fn zeros(categories: usize, vocab: usize) -> Self {
        CountMatrix {
            categories,
            vocab,
            counts: Array2::zeros((categories, categories * categories + vocab)),
        }
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn add_binary(&mut self, parent: usize, left: usize, right: usize, amount: F) {
        let col = left * self.categories + right;
        self.counts[[parent, col]] = self.counts[[parent, col]] + amount;
    }

    pub fn add_terminal(&mut self, parent: usize, word: usize, amount: F) {
        let col = self.categories * self.categories + word;
        self.counts[[parent, col]] = self.counts[[parent, col]] + amount;
    }

    pub fn binary_count(&self, parent: usize, left: usize, right: usize) -> F {
        self.counts[[parent, left * self.categories + right]]
    }

    pub fn terminal_count(&self, parent: usize, word: usize) -> F {
        self.counts[[parent, self.categories * self.categories + word]]
    }

    pub fn matrix(&self) -> &Array2<F> {
        &self.counts
    }

    pub fn total(&self) -> F {
        self.counts.iter().copied().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for &v in self.counts.iter() {
            if !v.is_finite() || v < F::zero() {
                return Err(Error::data("counts must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Draws a grammar from the symmetric Dirichlet prior with concentration
/// `beta`: every row is an independent Dirichlet(beta, ..., beta) draw.
pub fn sample_prior_grammar<F: Real>(
    categories: usize,
    vocab: usize,
    beta: F,
    seed: u64,
) -> Result<Grammar<F>> {
    let zero = CountMatrix::zeros(categories, vocab);
    sample_posterior_grammar(&zero, beta, seed)
}

/// Draws a grammar from the Dirichlet posterior `Dirichlet(beta + counts)`,
/// row by row. Row `r` uses the stream `(seed, grammar-domain, r)`, so the
/// draw for one row never depends on any other row.
///
/// Each row is realized as normalized Gamma variates: `x_o ~ Gamma(beta +
/// count_o, 1)`, `p_o = x_o / sum(x)`. Gamma shapes are used exactly as
/// given — no clamping — which is what makes the draw a genuine Dirichlet
/// sample even for concentrations below 1.
pub fn sample_posterior_grammar<F: Real>(
    counts: &CountMatrix<F>,
    beta: F,
    seed: u64,
) -> Result<Grammar<F>> {
    if !(beta > F::zero()) || !beta.is_finite() {
        return Err(Error::param("concentration must be positive and finite"));
    }
    if counts.categories == 0 {
        return Err(Error::param("grammar needs at least one category"));
    }
    if counts.vocab == 0 {
        return Err(Error::param("grammar needs a nonempty vocabulary"));
    }
    counts.validate()?;

    let cols = counts.categories * counts.categories + counts.vocab;
    let mut probs = Array2::zeros((counts.categories, cols));
    for r in 0..counts.categories {
        let mut rng = rng::stream(seed, domain::GRAMMAR, &[r as u64]);
        let mut sum = F::zero();
        for o in 0..cols {
            let shape = beta + counts.counts[[r, o]];
            let x = F::sample_gamma(shape, &mut rng);
            probs[[r, o]] = x;
            sum = sum + x;
        }
        if !(sum > F::zero()) {
            return Err(Error::Sampling(format!(
                "gamma draws for category {r} summed to zero"
            )));
        }
        // Single normalization absorbs all rounding; rows then sum to 1 to
        // within a few ulps.
        for o in 0..cols {
            probs[[r, o]] = probs[[r, o]] / sum;
        }
    }
    Grammar::from_probs(counts.categories, counts.vocab, probs)
}

/// Writes a grammar in the line-oriented text format:
///
/// ```text
/// categories<TAB>2
/// vocab<TAB>the cat sat
/// c0<TAB>c0<TAB>c1<TAB>2.5000000000000000e-1
/// c0<TAB>the<TAB>-<TAB>1.2500000000000000e-1
/// ```
///
/// Rules appear grouped by parent, binary rules first (in column order),
/// then emissions. Probabilities carry 17 significant digits, which
/// round-trips `f64` exactly.
pub fn write_grammar<F: Real, W: Write>(
    grammar: &Grammar<F>,
    vocab: &Vocabulary,
    out: &mut W,
) -> Result<()> {
    if vocab.len() != grammar.vocab_size() {
        return Err(Error::param(format!(
            "vocabulary has {} words but grammar expects {}",
            vocab.len(),
            grammar.vocab_size()
        )));
    }
    let c = grammar.categories();
    writeln!(out, "categories\t{c}")?;
    writeln!(out, "vocab\t{}", vocab.words().join(" "))?;
    for parent in 0..c {
        let ptok = CategorySet::token(parent);
        for left in 0..c {
            for right in 0..c {
                let p = grammar.binary_prob(parent, left, right);
                writeln!(
                    out,
                    "{ptok}\t{}\t{}\t{}",
                    CategorySet::token(left),
                    CategorySet::token(right),
                    format_prob(p)
                )?;
            }
        }
        for w in 0..vocab.len() {
            let p = grammar.terminal_prob(parent, w);
            writeln!(out, "{ptok}\t{}\t-\t{}", vocab.word(w), format_prob(p))?;
        }
    }
    Ok(())
}

pub fn format_prob<F: Real>(p: F) -> String {
    format!("{:.16e}", p.to_f64_lossy())
}

/// Reads the format produced by [`write_grammar`]. Unlisted rules get
/// probability zero; each category's row must still sum to 1 within `1e-6`.
/// All errors name the offending line (1-based).
pub fn read_grammar<F: Real, R: BufRead>(input: R) -> Result<(Grammar<F>, CategorySet, Vocabulary)> {
    let mut lines = input.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty grammar file"))?;
    let first = first?;
    let count_str = first
        .strip_prefix("categories\t")
        .ok_or_else(|| parse_err(1, "expected `categories<TAB><count>` header"))?;
    let categories: usize = count_str
        .trim()
        .parse()
        .map_err(|_| parse_err(1, "category count is not a number"))?;
    let cats = CategorySet::new(categories).map_err(|_| parse_err(1, "category count must be at least 1"))?;

    let (_, second) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing vocab header"))?;
    let second = second?;
    let vocab_str = second
        .strip_prefix("vocab\t")
        .ok_or_else(|| parse_err(2, "expected `vocab<TAB><words>` header"))?;
    let words: Vec<String> = vocab_str.split_whitespace().map(str::to_owned).collect();
    if words.is_empty() {
        return Err(parse_err(2, "vocabulary is empty"));
    }
    let vocab = match Vocabulary::new(words) {
        Ok(v) => v,
        Err(e) => return Err(parse_err(2, &e.to_string())),
    };

    let cols = categories * categories + vocab.len();
    let mut probs: Array2<F> = Array2::zeros((categories, cols));
    let mut seen: Vec<bool> = vec![false; categories * cols];
    let mut last_line_for_parent: Vec<usize> = vec![0; categories];

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                &format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let parent = cats
            .parse_token(fields[0])
            .ok_or_else(|| parse_err(lineno, &format!("unknown category {:?}", fields[0])))?;
        let prob: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, &format!("malformed probability {:?}", fields[3])))?;
        if !prob.is_finite() || prob < 0.0 {
            return Err(parse_err(lineno, "probability must be finite and nonnegative"));
        }

        let col = if fields[2] == "-" {
            let word = vocab
                .id(fields[1])
                .ok_or_else(|| parse_err(lineno, &format!("unknown word {:?}", fields[1])))?;
            categories * categories + word
        } else {
            let left = cats
                .parse_token(fields[1])
                .ok_or_else(|| parse_err(lineno, &format!("unknown category {:?}", fields[1])))?;
            let right = cats
                .parse_token(fields[2])
                .ok_or_else(|| parse_err(lineno, &format!("unknown category {:?}", fields[2])))?;
            left * categories + right
        };

        if seen[parent * cols + col] {
            return Err(parse_err(lineno, "duplicate rule"));
        }
        seen[parent * cols + col] = true;
        probs[[parent, col]] = F::from_f64_lossy(prob);
        last_line_for_parent[parent] = lineno;
    }

    for r in 0..categories {
        let sum: f64 = probs.row(r).iter().map(|v| v.to_f64_lossy()).sum();
        if (sum - 1.0).abs() > 1e-6 {
            let lineno = if last_line_for_parent[r] > 0 {
                last_line_for_parent[r]
            } else {
                2
            };
            return Err(parse_err(
                lineno,
                &format!("rules for {} sum to {sum}, not 1", CategorySet::token(r)),
            ));
        }
    }

    let grammar = Grammar {
        categories,
        vocab: vocab.len(),
        probs,
    };
    Ok((grammar, cats, vocab))
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_owned(),
    }
}
