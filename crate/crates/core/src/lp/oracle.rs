//! Exhaustive integer-program oracle for desk-scale instances.
//!
//! Enumerates every colour subset of size at most `K` and resegments the
//! graph under each, so the returned objective is a provable optimum. Shares
//! the shortest-path DP with [`crate::rounding::resegment`].

use crate::error::{Error, Result};
use crate::rounding::segment_objective;
use crate::tokgraph::TokenisationGraph;

/// Default ceiling on the number of colours the exhaustive search accepts.
pub const DEFAULT_ORACLE_LIMIT: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// Provably optimal weighted token count.
    pub objective: u64,
    /// Chosen colour indices, ascending.
    pub colour_indices: Vec<usize>,
    /// Chosen tokens sorted lexicographically.
    pub tokens: Vec<Vec<u8>>,
}

/// Exact minimum of the vocabulary-selection problem over all colour subsets
/// of size `<= budget`.
///
/// Co-optimal subsets are resolved by preferring the smaller total token byte
/// length, then the lexicographically smaller sorted token sequence, which
/// keeps the reported set deterministic.
pub fn brute_force_ip(
    graph: &TokenisationGraph,
    budget: usize,
    limit: usize,
) -> Result<OracleResult> {
    let n_colours = graph.colours().len();
    if n_colours > limit {
        return Err(Error::TooLarge {
            colours: n_colours,
            limit,
        });
    }
    let kmax = budget.min(n_colours);
    let mut chosen = vec![false; n_colours];

    struct Best {
        objective: u64,
        total_len: u64,
        tokens: Vec<Vec<u8>>,
        indices: Vec<usize>,
    }
    let mut best: Option<Best> = None;

    let mut consider = |subset: &[usize], chosen: &mut Vec<bool>| {
        for &i in subset {
            chosen[i] = true;
        }
        let objective = segment_objective(graph, chosen);
        for &i in subset {
            chosen[i] = false;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                if objective != b.objective {
                    objective < b.objective
                } else {
                    let total_len: u64 =
                        subset.iter().map(|&i| graph.colours()[i].len() as u64).sum();
                    if total_len != b.total_len {
                        total_len < b.total_len
                    } else {
                        let mut cand: Vec<&[u8]> =
                            subset.iter().map(|&i| graph.colours()[i].as_slice()).collect();
                        cand.sort();
                        cand.iter().copied().lt(b.tokens.iter().map(|t| t.as_slice()))
                    }
                }
            }
        };
        if better {
            let mut tokens: Vec<Vec<u8>> =
                subset.iter().map(|&i| graph.colours()[i].clone()).collect();
            tokens.sort();
            let total_len = tokens.iter().map(|t| t.len() as u64).sum();
            best = Some(Best {
                objective,
                total_len,
                tokens,
                indices: subset.to_vec(),
            });
        }
    };

    for size in 0..=kmax {
        // Lexicographic enumeration of index combinations of this size.
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            consider(&idx, &mut chosen);
            if !next_combination(&mut idx, n_colours) {
                break;
            }
        }
    }

    let best = best.expect("empty subset always considered");
    Ok(OracleResult {
        objective: best.objective,
        colour_indices: best.indices,
        tokens: best.tokens,
    })
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic
/// order; returns false once exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PretokenTable;
    use crate::tokgraph::{build_graph, EdgePolicy};

    fn graph_of(items: &[(&str, u64)]) -> TokenisationGraph {
        let table = PretokenTable::from_counts(items.iter().map(|(s, c)| (*s, *c)));
        build_graph(&table, &EdgePolicy::unbounded()).unwrap()
    }

    #[test]
    fn catalogue_optimum_is_nine() {
        let g = graph_of(&[("abc", 1), ("abd", 1), ("abe", 1), ("bc", 1), ("bd", 1), ("be", 1)]);
        let r = brute_force_ip(&g, 3, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(r.objective, 9);
        assert_eq!(
            r.tokens,
            vec![b"bc".to_vec(), b"bd".to_vec(), b"be".to_vec()]
        );
    }

    #[test]
    fn budget_zero_gives_total_bytes() {
        let g = graph_of(&[("abc", 2), ("de", 3)]);
        let r = brute_force_ip(&g, 0, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(r.objective, 2 * 3 + 3 * 2);
        assert!(r.tokens.is_empty());
    }

    #[test]
    fn whole_string_token_beats_pair() {
        let g = graph_of(&[("abab", 1)]);
        let r = brute_force_ip(&g, 1, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(r.objective, 1);
        assert_eq!(r.tokens, vec![b"abab".to_vec()]);
    }

    #[test]
    fn limit_guard_rejects_large_instances() {
        let g = graph_of(&[("abcdefgh", 1)]);
        assert!(matches!(
            brute_force_ip(&g, 2, 5),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn budget_beyond_colours_is_fine() {
        let g = graph_of(&[("ab", 4)]);
        let r = brute_force_ip(&g, 10, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(r.objective, 4);
        assert_eq!(r.tokens, vec![b"ab".to_vec()]);
    }

    #[test]
    fn combination_enumeration_is_complete() {
        let mut idx = vec![0usize, 1, 2];
        let mut count = 1;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count, 20); // C(6,3)
    }
}
