//! Cross-module pipeline checks: corpus -> graph -> LP -> rounding ->
//! tokeniser, and the bound/objective bookkeeping between them.

use toklp_core::corpus::{build_pretoken_table, Document, PretokenTable, Pretokenizer};
use toklp_core::lp::{assemble_lp, brute_force_ip, duality_gap, solve_pdhg, SolverOptions};
use toklp_core::metrics::{certify, corpus_objective};
use toklp_core::rounding::{resegment, RoundingKind, RoundingScheme};
use toklp_core::tokeniser::{to_ip_vectors, Provenance, SolverStats, Tokeniser};
use toklp_core::tokgraph::{build_graph, EdgePolicy};

fn catalogue_table() -> PretokenTable {
    PretokenTable::from_counts(["abc", "abd", "abe", "bc", "bd", "be"].map(|s| (s, 1u64)))
}

fn whitespace() -> Pretokenizer {
    Pretokenizer::preset("whitespace").unwrap()
}

/// Full train pipeline on the six-string catalogue corpus: the LP bound, the
/// oracle optimum, and every rounding land in the right order, and the three
/// objective computations agree.
#[test]
fn catalogue_pipeline_is_consistent() {
    let table = catalogue_table();
    let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
    let problem = assemble_lp(&graph, 3).unwrap();
    problem.validate().unwrap();
    let solution = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
    assert!(solution.converged);

    // The relaxation here is tight: the optimum is integral.
    assert!((solution.objective - 9.0).abs() < 1e-4);

    let ip = brute_force_ip(&graph, 3, 22).unwrap();
    assert_eq!(ip.objective, 9);
    assert!(solution.objective <= ip.objective as f64 + solution.duality_gap.abs() + 1e-9);

    for kind in [RoundingKind::Det, RoundingKind::Bias, RoundingKind::Int] {
        let chosen = RoundingScheme::new(kind).apply(&solution.colour_values, graph.colours(), 3);
        let seg = resegment(&graph, &chosen);
        assert!(seg.objective >= ip.objective);

        let tok = Tokeniser::from_colour_choice(
            &chosen,
            graph.colours(),
            vec![],
            kind,
            3,
            whitespace(),
            Provenance {
                graph_hash: graph.content_hash(),
                lp_value: Some(solution.objective),
                solver: Some(SolverStats {
                    iterations: solution.iterations as u64,
                    gap: solution.duality_gap,
                }),
            },
        )
        .unwrap();

        // Single source of truth: the resegment objective during training,
        // the corpus objective of the finished tokeniser, and the IP-vector
        // objective all agree.
        assert_eq!(corpus_objective(&tok, &table), seg.objective);
        let vectors = to_ip_vectors(&tok, &graph).unwrap();
        assert_eq!(vectors.objective(&graph), seg.objective);
        assert_eq!(
            vectors
                .colours
                .iter()
                .zip(graph.colours())
                .filter(|(&sel, _)| sel)
                .count(),
            tok.learned().len()
        );

        let cert = certify(
            &tok,
            &table,
            solution.objective,
            Some(graph.content_hash().as_str()),
        )
        .unwrap();
        assert!(cert.gap_ratio >= 100.0 - 1e-4);
    }
}

/// Det rounding at the catalogue optimum recovers an optimal vocabulary.
#[test]
fn catalogue_det_rounding_reaches_the_optimum() {
    let table = catalogue_table();
    let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
    let problem = assemble_lp(&graph, 3).unwrap();
    let solution = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
    let chosen = RoundingScheme::new(RoundingKind::Det).apply(
        &solution.colour_values,
        graph.colours(),
        3,
    );
    assert_eq!(resegment(&graph, &chosen).objective, 9);
}

/// The LP duals stored with a solution recompute to the same certificate.
#[test]
fn stored_duals_recertify() {
    let table = PretokenTable::from_counts([("abab", 2u64), ("bab", 1), ("ba", 4)]);
    let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
    let problem = assemble_lp(&graph, 2).unwrap();
    let solution = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
    let (primal, dual, gap) = duality_gap(&problem, &solution).unwrap();
    assert!((primal - solution.objective).abs() <= 1e-12 * (1.0 + primal.abs()));
    assert!((dual - solution.dual_objective).abs() <= 1e-9 * (1.0 + dual.abs()));
    assert!(gap.abs() <= 1e-6 * (1.0 + primal.abs() + dual.abs()));
}

/// Feasibility of the returned fractional point, directly on the graph
/// structure: flow conservation per block, coupling, and budget.
#[test]
fn solution_is_feasible_within_residuals() {
    let table = PretokenTable::from_counts([("aabb", 3u64), ("abab", 1), ("bb", 2)]);
    let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
    let k = 2;
    let problem = assemble_lp(&graph, k).unwrap();
    let s = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
    assert!(s.converged);
    let tol = 1e-6;

    for (t, block) in graph.blocks().iter().enumerate() {
        let n = block.len();
        let f0 = graph.free_offset(t);
        let p0 = graph.priced_offset(t);
        // Net flow at each vertex: -1 at source, +1 at sink, 0 inside.
        for v in 0..=n {
            let mut net = 0.0;
            if v > 0 {
                net += s.free_values[f0 + v - 1];
            }
            if v < n {
                net -= s.free_values[f0 + v];
            }
            for (e, edge) in block.priced.iter().enumerate() {
                if edge.end == v {
                    net += s.priced_values[p0 + e];
                }
                if edge.start == v {
                    net -= s.priced_values[p0 + e];
                }
            }
            let expected = if v == 0 {
                -1.0
            } else if v == n {
                1.0
            } else {
                0.0
            };
            assert!(
                (net - expected).abs() < tol,
                "block {t} vertex {v}: net flow {net}"
            );
        }
        // Coupling: p_e <= c_colour within tolerance.
        for (e, edge) in block.priced.iter().enumerate() {
            assert!(s.priced_values[p0 + e] <= s.colour_values[edge.colour] + tol);
        }
    }
    let mass: f64 = s.colour_values.iter().sum();
    assert!(mass <= k as f64 + tol);
}

/// Monotone budgets: a larger K can only help the relaxation.
#[test]
fn lp_value_is_monotone_in_budget() {
    let table = PretokenTable::from_counts([("abcabc", 2u64), ("cabba", 1), ("bc", 5)]);
    let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..6 {
        let problem = assemble_lp(&graph, k).unwrap();
        let s = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
        assert!(s.converged);
        assert!(
            s.objective <= prev + s.duality_gap.abs() + 1e-9,
            "K={k}: {} > {prev}",
            s.objective
        );
        prev = s.objective;
    }
}

/// End-to-end through the corpus module: documents to certified tokeniser.
#[test]
fn documents_to_certified_tokeniser() {
    let docs = ["the cat", "the hat", "the mat"].iter().enumerate().map(|(i, t)| {
        Ok(Document {
            id: format!("line-{i}"),
            bytes: t.as_bytes().to_vec(),
        })
    });
    let pretokenizer = Pretokenizer::preset("gpt4").unwrap();
    let table = build_pretoken_table(docs, &pretokenizer).unwrap();
    assert_eq!(table.entries()[0].0, b"the");
    assert_eq!(table.get(b"the").unwrap().1, 3);

    let graph = build_graph(&table, &EdgePolicy::default()).unwrap();
    let problem = assemble_lp(&graph, 2).unwrap();
    let solution = solve_pdhg(&problem, &SolverOptions::default()).unwrap();
    assert!(solution.converged);
    let chosen = RoundingScheme::new(RoundingKind::Det).apply(
        &solution.colour_values,
        graph.colours(),
        2,
    );
    let tok = Tokeniser::from_colour_choice(
        &chosen,
        graph.colours(),
        vec![],
        RoundingKind::Det,
        2,
        pretokenizer,
        Provenance::bare(graph.content_hash()),
    )
    .unwrap();
    let seg = resegment(&graph, &chosen);
    assert_eq!(corpus_objective(&tok, &table), seg.objective);

    // Whole-document encoding round-trips.
    let text = b"the cat in the hat";
    let ts = tok.encode(text).unwrap();
    assert_eq!(tok.decode(&ts).unwrap(), text);
}

/// Graph dump and LP dump are stable plain-text artefacts.
#[test]
fn diagnostic_dumps() {
    let table = PretokenTable::from_counts([("ab", 1u64)]);
    let graph = build_graph(&table, &EdgePolicy::unbounded()).unwrap();
    let mut gdump = Vec::new();
    graph.dump(&mut gdump).unwrap();
    let gtext = String::from_utf8(gdump).unwrap();
    assert!(gtext.contains("pretoken 0"));
    assert!(gtext.contains("priced 0 2 colour 0"));

    let problem = assemble_lp(&graph, 1).unwrap();
    let mut ldump = Vec::new();
    problem.dump_lp(&mut ldump).unwrap();
    let ltext = String::from_utf8(ldump).unwrap();
    assert!(ltext.contains("budget: + 1 c0 <= 1"));
}
