//! Grammar induction from raw text.
//!
//! This crate learns binary probabilistic context-free grammars from
//! tokenized, unannotated sentences by Gibbs sampling: parse trees and
//! grammar parameters are resampled in alternation, with a symmetric
//! Dirichlet prior over rule distributions. Induction can run either
//! unbounded or restricted to trees a left-corner parser could build with a
//! fixed stack depth; the restriction is applied by reweighting the grammar
//! itself, so the sampler machinery is unchanged. Posterior samples are
//! decoded into a single tree per sentence by maximizing per-span posterior
//! split probabilities, and predictions are scored with unlabeled
//! bracketing precision/recall against reference treebanks.
//!
//! All numeric code is generic over the scalar (see [`num::Real`]); the
//! aliases below fix `f64`, which is what the command-line tools use.

pub mod bounding;
pub mod chart;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod grammar;
pub mod num;
pub mod pioc;
pub mod rng;
pub mod treebank;

pub use error::{Error, Result};
pub use num::Real;

/// Default-precision aliases; the library is generic, the tools use these.
pub type Grammar = grammar::Grammar<f64>;
pub type CountMatrix = grammar::CountMatrix<f64>;
pub type Containment = bounding::Containment<f64>;
pub type BoundedGrammar = bounding::BoundedGrammar<f64>;
pub type PositionCounts = bounding::PositionCounts<f64>;
pub type ChartGrammar = chart::ChartGrammar<f64>;
pub type InsideChart = chart::InsideChart<f64>;
pub type SamplerState = gibbs::SamplerState<f64>;

