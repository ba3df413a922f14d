//! Rounding of fractional colour vectors into discrete vocabularies, and the
//! shortest-path resegmentation that re-derives optimal discrete edge values
//! for a chosen colour set.

use rayon::prelude::*;

use crate::tokgraph::{Block, TokenisationGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingKind {
    Det,
    Bias,
    Int,
}

impl RoundingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RoundingKind::Det => "det",
            RoundingKind::Bias => "bias",
            RoundingKind::Int => "int",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "det" => Some(RoundingKind::Det),
            "bias" => Some(RoundingKind::Bias),
            "int" => Some(RoundingKind::Int),
            _ => None,
        }
    }
}

/// A rounding scheme choice; the threshold only matters for `Int`.
#[derive(Debug, Clone, Copy)]
pub struct RoundingScheme {
    pub kind: RoundingKind,
    pub int_threshold: f64,
}

pub const DEFAULT_INT_THRESHOLD: f64 = 0.999;

impl RoundingScheme {
    pub fn new(kind: RoundingKind) -> Self {
        Self {
            kind,
            int_threshold: DEFAULT_INT_THRESHOLD,
        }
    }

    pub fn apply(&self, colour_values: &[f64], colours: &[Vec<u8>], budget: usize) -> Vec<bool> {
        match self.kind {
            RoundingKind::Det => round_det(colour_values, colours, budget),
            RoundingKind::Bias => round_bias(colour_values, colours, budget),
            RoundingKind::Int => round_int(colour_values, self.int_threshold),
        }
    }
}

fn top_k_by<F>(key: F, colours: &[Vec<u8>], budget: usize) -> Vec<bool>
where
    F: Fn(usize) -> f64,
{
    let mut order: Vec<usize> = (0..colours.len()).collect();
    order.sort_by(|&a, &b| {
        key(b)
            .total_cmp(&key(a))
            .then_with(|| colours[a].cmp(&colours[b]))
            .then_with(|| a.cmp(&b))
    });
    let mut chosen = vec![false; colours.len()];
    for &i in order.iter().take(budget.min(colours.len())) {
        chosen[i] = true;
    }
    chosen
}

/// Selects exactly `min(budget, #colours)` colours: the largest values of
/// `c`, ties broken by lexicographic token bytes, then colour index.
pub fn round_det(colour_values: &[f64], colours: &[Vec<u8>], budget: usize) -> Vec<bool> {
    debug_assert_eq!(colour_values.len(), colours.len());
    top_k_by(|i| colour_values[i], colours, budget)
}

/// Like [`round_det`] but ranks by `c / token_byte_length`, biasing the
/// selection towards shorter tokens when scores are comparable.
pub fn round_bias(colour_values: &[f64], colours: &[Vec<u8>], budget: usize) -> Vec<bool> {
    debug_assert_eq!(colour_values.len(), colours.len());
    top_k_by(
        |i| colour_values[i] / colours[i].len() as f64,
        colours,
        budget,
    )
}

/// Keeps only colours the relaxation already treats as forced: value at or
/// above `threshold`. May select fewer colours than the budget allows.
pub fn round_int(colour_values: &[f64], threshold: f64) -> Vec<bool> {
    debug_assert!(threshold > 0.0 && threshold <= 1.0);
    colour_values.iter().map(|&v| v >= threshold).collect()
}

/// Optimal discrete segmentation of every pretoken given a colour choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    /// Weighted total token count over the table.
    pub objective: u64,
    /// Per pretoken, the canonical path as `(start, end)` byte spans.
    pub paths: Vec<Vec<(usize, usize)>>,
}

/// Shortest-path DP over one block: free byte-edges plus priced edges whose
/// colour is chosen. Returns the minimal token count and the canonical path
/// (ties resolved by taking the longest token first, left to right).
pub(crate) fn segment_block(block: &Block, chosen: &[bool]) -> (usize, Vec<(usize, usize)>) {
    let n = block.len();
    let mut best = vec![usize::MAX; n + 1];
    let mut next = vec![0usize; n + 1];
    best[n] = 0;
    for i in (0..n).rev() {
        // The free edge guarantees feasibility of every position.
        let mut b = best[i + 1] + 1;
        let mut jump = i + 1;
        for e in block.priced_from(i) {
            if chosen[e.colour] {
                let cand = best[e.end] + 1;
                if cand < b || (cand == b && e.end > jump) {
                    b = cand;
                    jump = e.end;
                }
            }
        }
        best[i] = b;
        next[i] = jump;
    }
    let mut path = Vec::with_capacity(best[0]);
    let mut pos = 0;
    while pos < n {
        path.push((pos, next[pos]));
        pos = next[pos];
    }
    (best[0], path)
}

/// Recomputes optimal discrete edge values for `chosen` colours over the
/// whole graph. Blocks are independent; the per-pretoken DP runs in parallel
/// with an order-preserving collect.
pub fn resegment(graph: &TokenisationGraph, chosen: &[bool]) -> Segmentation {
    debug_assert_eq!(chosen.len(), graph.colours().len());
    let results: Vec<(u64, Vec<(usize, usize)>)> = graph
        .blocks()
        .par_iter()
        .map(|block| {
            let (count, path) = segment_block(block, chosen);
            (block.weight * count as u64, path)
        })
        .collect();
    let mut objective = 0u64;
    let mut paths = Vec::with_capacity(results.len());
    for (weighted, path) in results {
        objective += weighted;
        paths.push(path);
    }
    Segmentation { objective, paths }
}

/// Objective-only variant of [`resegment`].
pub fn segment_objective(graph: &TokenisationGraph, chosen: &[bool]) -> u64 {
    graph
        .blocks()
        .iter()
        .map(|b| b.weight * segment_block(b, chosen).0 as u64)
        .sum()
}
