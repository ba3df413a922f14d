//! Property suites over randomised inputs: lossless pretokenisation, graph
//! structure, encoder optimality against an exhaustive oracle, round trips,
//! rounding feasibility, and entropy monotonicity.

use std::collections::HashSet;

use proptest::prelude::*;

use toklp_core::corpus::{PretokenTable, Pretokenizer};
use toklp_core::lp::{assemble_lp, solve_pdhg, SolverOptions};
use toklp_core::metrics::renyi_entropy;
use toklp_core::rounding::{resegment, round_bias, round_det, round_int};
use toklp_core::tokeniser::{train_bpe, Provenance, Tokeniser};
use toklp_core::tokgraph::{build_graph, EdgePolicy};
use toklp_core::rounding::RoundingKind;

fn whitespace() -> Pretokenizer {
    Pretokenizer::preset("whitespace").unwrap()
}

/// Every segmentation of `s` into vocab tokens, enumerated recursively; the
/// minimum length is the reference for the encoder's DP. Single bytes are
/// always available.
fn exhaustive_min_tokens(s: &[u8], vocab: &HashSet<Vec<u8>>) -> usize {
    if s.is_empty() {
        return 0;
    }
    let mut best = usize::MAX;
    for end in 1..=s.len() {
        let prefix = &s[..end];
        if end == 1 || vocab.contains(prefix) {
            best = best.min(1 + exhaustive_min_tokens(&s[end..], vocab));
        }
    }
    best
}

fn tokeniser_with(learned: Vec<Vec<u8>>) -> Tokeniser {
    let chosen = vec![true; learned.len()];
    Tokeniser::from_colour_choice(
        &chosen,
        &learned,
        vec![],
        RoundingKind::Det,
        learned.len(),
        whitespace(),
        Provenance::bare("prop".into()),
    )
    .unwrap()
}

proptest! {
    /// Pretokenisation is a lossless partition for both shipped presets.
    #[test]
    fn pretokenise_is_lossless(text in ".{0,200}") {
        for preset in ["gpt4", "whitespace"] {
            let p = Pretokenizer::preset(preset).unwrap();
            let parts = p.pretokenise(text.as_bytes()).unwrap();
            let joined: Vec<u8> = parts.concat();
            prop_assert_eq!(joined, text.as_bytes().to_vec());
            prop_assert!(parts.iter().all(|part| !part.is_empty()));
        }
    }

    /// Graph size formulas for the unbounded policy.
    #[test]
    fn graph_size_formulas(words in proptest::collection::vec("[a-c]{1,7}", 1..5)) {
        let table = PretokenTable::from_counts(words.iter().map(|w| (w.as_str(), 1u64)));
        let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
        let mut vertices = 0;
        let mut free = 0;
        let mut priced = 0;
        let mut colour_edge_total = 0;
        for block in graph.blocks() {
            let n = block.len();
            vertices += n + 1;
            free += n;
            priced += n * n.saturating_sub(1) / 2;
            colour_edge_total += block.priced.len();
        }
        prop_assert_eq!(graph.num_vertices(), vertices);
        prop_assert_eq!(graph.num_free_edges(), free);
        prop_assert_eq!(graph.num_priced_edges(), priced);
        // Colours partition the priced edges.
        prop_assert_eq!(colour_edge_total, priced);
        let count_sum: u64 = graph.colour_counts().iter().sum();
        let weighted_edges: u64 = graph
            .blocks()
            .iter()
            .map(|b| b.weight * b.priced.len() as u64)
            .sum();
        prop_assert_eq!(count_sum, weighted_edges);
    }

    /// Dedup preserves mass: table totals equal raw pretoken mass.
    #[test]
    fn dedup_preserves_mass(words in proptest::collection::vec("[a-d]{1,6}", 1..20)) {
        let table = PretokenTable::from_counts(words.iter().map(|w| (w.as_str(), 1u64)));
        let raw: u64 = words.iter().map(|w| w.len() as u64).sum();
        prop_assert_eq!(table.total_bytes(), raw);
        let recomputed: u64 = table
            .entries()
            .iter()
            .map(|(b, c)| c * b.len() as u64)
            .sum();
        prop_assert_eq!(recomputed, raw);
    }

    /// decode(encode(s)) is the identity on arbitrary UTF-8, for a tokeniser
    /// with some learned tokens.
    #[test]
    fn encode_decode_round_trip(text in "\\PC{0,120}") {
        let tok = tokeniser_with(vec![b"th".to_vec(), b"the".to_vec(), b"ab".to_vec()]);
        let ts = tok.encode(text.as_bytes()).unwrap();
        prop_assert_eq!(tok.decode(&ts).unwrap(), text.as_bytes().to_vec());
    }

    /// The encoder's token count matches exhaustive search on short inputs.
    #[test]
    fn encoder_is_minimal(
        s in "[a-c]{1,10}",
        vocab in proptest::collection::hash_set("[a-c]{2,4}", 0..6),
    ) {
        let learned: Vec<Vec<u8>> = {
            let mut v: Vec<Vec<u8>> = vocab.iter().map(|t| t.as_bytes().to_vec()).collect();
            v.sort();
            v
        };
        let tok = tokeniser_with(learned.clone());
        let ids = tok.encode_pretoken(s.as_bytes());
        let reference = exhaustive_min_tokens(
            s.as_bytes(),
            &learned.into_iter().collect::<HashSet<_>>(),
        );
        prop_assert_eq!(ids.len(), reference);
    }

    /// BPE round-trips text too (merge replay never loses bytes).
    #[test]
    fn bpe_round_trip(text in "[ab c]{0,60}") {
        let table = PretokenTable::from_counts([("abab", 4u64), ("cab", 2), ("bc", 1)]);
        let tok = train_bpe(&table, 3, vec![], whitespace()).unwrap();
        let ts = tok.encode(text.as_bytes()).unwrap();
        prop_assert_eq!(tok.decode(&ts).unwrap(), text.as_bytes().to_vec());
    }

    /// Det and Bias never overshoot the budget; Int never overshoots the
    /// colour count; resegment dominates the LP bound.
    #[test]
    fn rounding_feasibility(
        words in proptest::collection::vec("[a-b]{1,5}", 1..4),
        k in 0usize..4,
    ) {
        let table = PretokenTable::from_counts(words.iter().map(|w| (w.as_str(), 1u64)));
        let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
        let problem = assemble_lp(&graph, k).unwrap();
        let s = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
        prop_assert!(s.converged);
        let det = round_det(&s.colour_values, graph.colours(), k);
        let bias = round_bias(&s.colour_values, graph.colours(), k);
        let int = round_int(&s.colour_values, 0.999);
        prop_assert_eq!(det.iter().filter(|&&b| b).count(), k.min(graph.colours().len()));
        prop_assert_eq!(bias.iter().filter(|&&b| b).count(), k.min(graph.colours().len()));
        prop_assert!(int.iter().filter(|&&b| b).count() <= graph.colours().len());
        for chosen in [det, bias, int] {
            let seg = resegment(&graph, &chosen);
            prop_assert!(seg.objective as f64 >= s.objective - s.duality_gap.abs() - 1e-9);
        }
    }

    /// Rényi entropy is non-increasing in alpha.
    #[test]
    fn renyi_non_increasing(raw in proptest::collection::vec(0.01f64..1.0, 2..12)) {
        let total: f64 = raw.iter().sum();
        let dist: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let grid = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 8.0];
        let mut prev = f64::INFINITY;
        for alpha in grid {
            let h = renyi_entropy(&dist, alpha).unwrap();
            prop_assert!(h <= prev + 1e-12, "alpha={} h={} prev={}", alpha, h, prev);
            prev = h;
        }
    }

    /// Serialization round trip: same bytes, same behaviour.
    #[test]
    fn tokeniser_file_round_trip(words in proptest::collection::vec("[a-c]{2,6}", 1..5), k in 0usize..5) {
        let table = PretokenTable::from_counts(words.iter().map(|w| (w.as_str(), 1u64)));
        let tok = train_bpe(&table, k, vec![], whitespace()).unwrap();
        let text = tok.to_json_string();
        let back = Tokeniser::from_json_str(&text).unwrap();
        prop_assert_eq!(back.to_json_string(), text);
        let sample = words.join(" ");
        prop_assert_eq!(
            back.encode(sample.as_bytes()).unwrap(),
            tok.encode(sample.as_bytes()).unwrap()
        );
    }
}
