//! Trees, bracketed-text parsing, corpora, and tree-shape measures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grammar::Vocabulary;

/// An ordered tree over string labels and string leaves. Nothing here
/// assumes binarity; parsers for samples and references share this type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    Leaf(String),
    Node { label: String, children: Vec<Tree> },
}

/// Path from the root: child indices, left to right. Empty = root.
pub type GornAddress = Vec<usize>;

impl Tree {
    pub fn leaf(token: impl Into<String>) -> Tree {
        Tree::Leaf(token.into())
    }

    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Leaf(_) => &[],
            Tree::Node { children, .. } => children,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Tree::Leaf(t) => t,
            Tree::Node { label, .. } => label,
        }
    }

    /// Leaf tokens, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf(t) => out.push(t),
            Tree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::num_leaves).sum(),
        }
    }

    pub fn node_at(&self, address: &[usize]) -> Option<&Tree> {
        let mut cur = self;
        for &i in address {
            cur = cur.children().get(i)?;
        }
        Some(cur)
    }

    /// All nodes in preorder, paired with their Gorn addresses.
    pub fn addressed_nodes(&self) -> Vec<(GornAddress, &Tree)> {
        let mut out = Vec::new();
        let mut addr = Vec::new();
        self.walk(&mut addr, &mut out);
        out
    }

    fn walk<'a>(&'a self, addr: &mut GornAddress, out: &mut Vec<(GornAddress, &'a Tree)>) {
        out.push((addr.clone(), self));
        for (i, c) in self.children().iter().enumerate() {
            addr.push(i);
            c.walk(addr, out);
            addr.pop();
        }
    }
}

/// Parses one tree in bracketed notation: `(label child child ...)` with
/// bare tokens as leaves. The whole string must be a single tree; errors
/// carry the character offset of the problem.
pub fn parse_bracketed(text: &str) -> Result<Tree> {
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    skip_ws(bytes, &mut pos);
    if pos == bytes.len() {
        return Err(syntax(pos, "empty input"));
    }
    let tree = parse_node(bytes, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos != bytes.len() {
        return Err(syntax(pos, "trailing input after tree"));
    }
    Ok(tree)
}

fn parse_node(bytes: &[u8], pos: &mut usize) -> Result<Tree> {
    if bytes.get(*pos) == Some(&b'(') {
        let open = *pos;
        *pos += 1;
        skip_ws(bytes, pos);
        let label = read_token(bytes, pos);
        if label.is_empty() {
            return Err(syntax(*pos, "expected node label after `(`"));
        }
        let mut children = Vec::new();
        loop {
            skip_ws(bytes, pos);
            match bytes.get(*pos) {
                None => return Err(syntax(open, "unclosed `(`")),
                Some(b')') => {
                    *pos += 1;
                    break;
                }
                Some(_) => children.push(parse_node(bytes, pos)?),
            }
        }
        if children.is_empty() {
            return Err(syntax(open, "node has no children"));
        }
        Ok(Tree::node(label, children))
    } else {
        let start = *pos;
        let tok = read_token(bytes, pos);
        if tok.is_empty() {
            return Err(syntax(start, "expected token or `(`"));
        }
        Ok(Tree::leaf(tok))
    }
}

fn read_token(bytes: &[u8], pos: &mut usize) -> String {
    let start = *pos;
    while *pos < bytes.len() {
        let b = bytes[*pos];
        if b == b'(' || b == b')' || (b as char).is_whitespace() {
            break;
        }
        *pos += 1;
    }
    String::from_utf8_lossy(&bytes[start..*pos]).into_owned()
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && (bytes[*pos] as char).is_whitespace() {
        *pos += 1;
    }
}

fn syntax(offset: usize, msg: &str) -> Error {
    Error::Syntax {
        offset,
        msg: msg.to_owned(),
    }
}

/// Renders a tree in the notation [`parse_bracketed`] accepts. A bare leaf
/// renders as its token.
pub fn emit_bracketed(tree: &Tree) -> String {
    let mut out = String::new();
    emit_into(tree, &mut out);
    out
}

fn emit_into(tree: &Tree, out: &mut String) {
    match tree {
        Tree::Leaf(t) => out.push_str(t),
        Tree::Node { label, children } => {
            let _ = write!(out, "({label}");
            for c in children {
                out.push(' ');
                emit_into(c, out);
            }
            out.push(')');
        }
    }
}

/// Reads one bracketed tree per line, skipping blank lines. Errors name the
/// line and the offset within it.
pub fn read_trees<R: BufRead>(input: R) -> Result<Vec<Tree>> {
    let mut trees = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tree = parse_bracketed(&line).map_err(|e| match e {
            Error::Syntax { offset, msg } => Error::Parse {
                line: idx + 1,
                msg: format!("offset {offset}: {msg}"),
            },
            other => other,
        })?;
        trees.push(tree);
    }
    Ok(trees)
}

/// A tokenized corpus: one sentence per line, whitespace-separated tokens,
/// with words interned against a shared vocabulary.
#[derive(Clone, Debug)]
pub struct Corpus {
    sentences: Vec<Vec<u32>>,
    vocabulary: Vocabulary,
}

impl Corpus {
    pub fn from_text(text: &str) -> Result<Corpus> {
        let lines: Vec<&str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::data("corpus has no sentences"));
        }
        let vocabulary = Vocabulary::from_tokens(lines.iter().flat_map(|l| l.split_whitespace()));
        let sentences = lines
            .iter()
            .map(|l| {
                l.split_whitespace()
                    .map(|t| vocabulary.id(t).expect("interned") as u32)
                    .collect()
            })
            .collect();
        Ok(Corpus {
            sentences,
            vocabulary,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let text = std::fs::read_to_string(path)?;
        Corpus::from_text(&text)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn sentence(&self, i: usize) -> &[u32] {
        &self.sentences[i]
    }

    pub fn sentences(&self) -> &[Vec<u32>] {
        &self.sentences
    }

    pub fn tokens(&self, i: usize) -> Vec<&str> {
        self.sentences[i]
            .iter()
            .map(|&id| self.vocabulary.word(id as usize))
            .collect()
    }
}

/// Default punctuation test: nonempty and no alphanumeric characters.
/// Catches ASCII punctuation along with typographic quotes, dashes,
/// ellipses and currency/math symbols; overridable wherever a predicate is
/// taken.
pub fn default_is_punctuation(token: &str) -> bool {
    !token.is_empty()
        && token
            .chars()
            .all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

/// Removes punctuation leaves, then dissolves the damage: nodes left with
/// no children disappear, and a node left with a single internal child is
/// replaced by that child (so unary chains never survive). Preterminals —
/// nodes wrapping exactly one leaf — are kept. Returns `None` if nothing
/// remains.
pub fn strip_punctuation(tree: &Tree, is_punct: &dyn Fn(&str) -> bool) -> Option<Tree> {
    match tree {
        Tree::Leaf(t) => (!is_punct(t)).then(|| tree.clone()),
        Tree::Node { label, children } => {
            let kept: Vec<Tree> = children
                .iter()
                .filter_map(|c| strip_punctuation(c, is_punct))
                .collect();
            match kept.len() {
                0 => None,
                1 if !kept[0].is_leaf() => Some(kept.into_iter().next().unwrap()),
                _ => Some(Tree::node(label.clone(), kept)),
            }
        }
    }
}

/// The right-branching tree over `tokens`: `(X w1 (X w2 (X w3 w4)))`, with
/// every node labeled `X`. A single token yields a bare leaf.
pub fn right_branching_tree(tokens: &[&str]) -> Result<Tree> {
    if tokens.is_empty() {
        return Err(Error::param("cannot build a tree over zero tokens"));
    }
    Ok(right_branching_rec(tokens))
}

fn right_branching_rec(tokens: &[&str]) -> Tree {
    if tokens.len() == 1 {
        Tree::leaf(tokens[0])
    } else {
        Tree::node(
            "X",
            vec![Tree::leaf(tokens[0]), right_branching_rec(&tokens[1..])],
        )
    }
}

/// Left-corner stack depth of a binary tree.
///
/// Nodes occupy side/depth positions determined top-down from the root,
/// which sits at (right, 0): a node at (left, d) passes (left, d) to its
/// left child and (right, d) to its right child, while a node at (right, d)
/// passes (left, d+1) to its left child — depth grows exactly for left
/// children of right children — and (right, d) to its right child.
///
/// The measure ranges over binary-expanding nodes only: each such node
/// requires stack capacity max(1, d) for its position depth d (any binary
/// expansion occupies at least the first stack element), and the tree's
/// depth is the maximum requirement. A node that merely emits a word never
/// counts, so a lexical left child hanging at depth d+1 under a (right, d)
/// node — which a d-bounded grammar permits — adds nothing. A bare leaf or
/// lone preterminal has depth 0.
///
/// Accepts binary trees whose preterminals wrap a single leaf; any other
/// arity is a data error.
pub fn left_corner_depth(tree: &Tree) -> Result<usize> {
    depth_rec(tree, false, 0)
}

fn depth_rec(tree: &Tree, is_left: bool, depth: usize) -> Result<usize> {
    match tree {
        Tree::Leaf(_) => Ok(0),
        Tree::Node { children, .. } => match children.as_slice() {
            [Tree::Leaf(_)] => Ok(0),
            [left, right] => {
                let left_depth = if is_left { depth } else { depth + 1 };
                let here = depth.max(1);
                let a = depth_rec(left, true, left_depth)?;
                let b = depth_rec(right, false, depth)?;
                Ok(here.max(a).max(b))
            }
            _ => Err(Error::data(format!(
                "tree is not binary: node {:?} has {} children",
                tree.label(),
                children.len()
            ))),
        },
    }
}

/// Fraction of trees at each left-corner depth.
pub fn depth_histogram(trees: &[Tree]) -> Result<BTreeMap<usize, f64>> {
    if trees.is_empty() {
        return Err(Error::data("no trees to histogram"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in trees {
        *counts.entry(left_corner_depth(t)?).or_default() += 1;
    }
    let n = trees.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(d, c)| (d, c as f64 / n))
        .collect())
}
