//! Tokeniser construction by linear programming.
//!
//! The pipeline: split a corpus into weighted pretokens, build a layered
//! tokenisation graph whose priced edges are partitioned into colours (one
//! per candidate token), relax the resulting vocabulary-selection integer
//! program into an LP, solve it with a restarted primal-dual first-order
//! method, round the fractional colour vector into a vocabulary, and
//! resegment to obtain a working tokeniser. The LP value doubles as a lower
//! bound that certifies how far any tokeniser is from compression-optimal on
//! the same corpus. A faithful BPE trainer is included as the baseline.

pub mod corpus;
pub mod error;
pub mod hash;
pub mod lp;
pub mod metrics;
pub mod rounding;
pub mod tokeniser;
pub mod tokgraph;

pub use error::{Error, Result};
