//! Subcommand implementations.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;

use toklp_core::corpus::{
    build_pretoken_table, load_corpus, split_document, CorpusFormat, Document, PretokenTable,
    Pretokenizer,
};
use toklp_core::lp::{
    assemble_lp, brute_force_ip, solve_pdhg, GapMode, IntegralityStats, LpSolution, SolverOptions,
};
use toklp_core::metrics::{certify_values, corpus_objective, intrinsic_metrics, jaccard_stability};
use toklp_core::rounding::{resegment, RoundingKind, RoundingScheme};
use toklp_core::tokeniser::{Provenance, SolverStats, SpecialToken, Tokeniser};
use toklp_core::tokgraph::{build_graph, EdgePolicy, TokenisationGraph};

use crate::manifest::{default_manifest_path, FileHash, RunManifest, SolverSummary};
use crate::{
    CertifyArgs, CodecArgs, CorpusOpts, FormatArg, GapModeArg, MetricsArgs, OracleArgs,
    PolicyOpts, RoundingArg, SolverOpts, StabilityArgs, TrainBpeArgs, TrainConvexTokArgs,
    UsageError,
};

impl FormatArg {
    fn to_core(self) -> CorpusFormat {
        match self {
            FormatArg::Plain => CorpusFormat::PlainLines,
            FormatArg::Jsonl => CorpusFormat::JsonlTextField,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            FormatArg::Plain => "plain",
            FormatArg::Jsonl => "jsonl",
        }
    }
}

impl RoundingArg {
    fn to_core(self) -> RoundingKind {
        match self {
            RoundingArg::Det => RoundingKind::Det,
            RoundingArg::Bias => RoundingKind::Bias,
            RoundingArg::Int => RoundingKind::Int,
        }
    }
}

impl SolverOpts {
    fn to_core(&self) -> SolverOptions {
        SolverOptions {
            gap_mode: match self.gap_mode {
                GapModeArg::Rel => GapMode::Relative,
                GapModeArg::Abs => GapMode::Absolute,
            },
            gap_tolerance: self.gap_tol,
            residual_tolerance: self.res_tol,
            max_iterations: self.max_iters,
            preconditioned: !self.no_precond,
            ..SolverOptions::default()
        }
    }

    fn record(&self, manifest: &mut RunManifest) {
        manifest.flag("gap_tol", self.gap_tol);
        manifest.flag(
            "gap_mode",
            match self.gap_mode {
                GapModeArg::Rel => "rel",
                GapModeArg::Abs => "abs",
            },
        );
        manifest.flag("res_tol", self.res_tol);
        manifest.flag("max_iters", self.max_iters);
        manifest.flag("precond", !self.no_precond);
    }
}

impl PolicyOpts {
    fn to_core(&self) -> EdgePolicy {
        EdgePolicy {
            max_token_len: if self.max_token_len == 0 {
                None
            } else {
                Some(self.max_token_len)
            },
            min_colour_count: self.min_colour_count,
            name: "default".to_string(),
        }
    }

    fn record(&self, manifest: &mut RunManifest) {
        manifest.flag("max_token_len", self.max_token_len);
        manifest.flag("min_colour_count", self.min_colour_count);
    }
}

fn resolve_pretokenizer(spec: &str) -> Result<Pretokenizer> {
    if let Ok(p) = Pretokenizer::preset(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    if path.is_file() {
        let pattern = std::fs::read_to_string(path)
            .with_context(|| format!("reading pretokenizer pattern from {}", path.display()))?;
        return Ok(Pretokenizer::from_pattern(pattern.trim_end_matches('\n'))?);
    }
    Err(UsageError(format!(
        "--pretokenizer {spec:?} is neither a preset (gpt4, whitespace) nor a readable file"
    ))
    .into())
}

fn parse_specials(specs: &[String]) -> Vec<SpecialToken> {
    specs
        .iter()
        .map(|spec| match spec.split_once('=') {
            Some((name, bytes)) => SpecialToken {
                name: name.to_string(),
                bytes: bytes.as_bytes().to_vec(),
            },
            None => SpecialToken::named(spec),
        })
        .collect()
}

fn load_table(corpus: &Path, opts: &CorpusOpts, pret: &Pretokenizer) -> Result<PretokenTable> {
    let docs = load_documents(corpus, opts, pret)?;
    Ok(build_pretoken_table(docs.into_iter().map(Ok), pret)?)
}

fn load_documents(corpus: &Path, opts: &CorpusOpts, pret: &Pretokenizer) -> Result<Vec<Document>> {
    let stream = load_corpus(corpus, opts.format.to_core())?;
    let mut docs = Vec::new();
    for item in stream {
        let doc = match item {
            Ok(d) => d,
            Err(e) if !opts.strict => {
                eprintln!("skipping record: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if opts.max_doc_bytes > 0 && doc.bytes.len() > opts.max_doc_bytes {
            docs.extend(split_document(&doc, pret, opts.max_doc_bytes)?);
        } else {
            docs.push(doc);
        }
    }
    Ok(docs)
}

fn record_corpus_opts(manifest: &mut RunManifest, opts: &CorpusOpts, pret: &Pretokenizer) {
    manifest.flag("format", opts.format.as_str());
    manifest.flag("pretokenizer", pret.spec());
    manifest.flag("strict", opts.strict);
    manifest.flag("max_doc_bytes", opts.max_doc_bytes);
}

fn solver_summary(budget: usize, solution: &LpSolution) -> SolverSummary {
    let stats = IntegralityStats::from_solution(budget, solution);
    SolverSummary {
        iterations: solution.iterations,
        converged: solution.converged,
        lp_value: solution.objective,
        dual_value: solution.dual_objective,
        duality_gap: solution.duality_gap,
        gap_mode: solution.gap_mode.as_str().to_string(),
        gap_tolerance: solution.gap_tolerance,
        primal_residual: solution.primal_residual,
        dual_residual: solution.dual_residual,
        colour_ones: stats.colour_ones,
        colour_nonzeros: stats.colour_nonzeros,
    }
}

pub fn train_convextok(args: &TrainConvexTokArgs, json: bool) -> Result<()> {
    let started = Instant::now();
    let pret = resolve_pretokenizer(&args.corpus_opts.pretokenizer)?;
    let table = load_table(&args.corpus, &args.corpus_opts, &pret)?;
    let t_corpus = started.elapsed();

    let policy = args.policy.to_core();
    let graph = build_graph(&table, &policy)?;
    if let Some(path) = &args.dump_graph {
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        graph.dump(&mut file)?;
    }
    let problem = assemble_lp(&graph, args.k)?;
    if let Some(path) = &args.dump_lp {
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        problem.dump_lp(&mut file)?;
    }
    let t_assemble = started.elapsed();

    let solution = solve_pdhg(&problem, &args.solver.to_core())?;
    if !solution.converged {
        eprintln!(
            "warning: solver hit the iteration cap ({} iterations); the bound is not certified",
            solution.iterations
        );
    }
    let t_solve = started.elapsed();

    let scheme = RoundingScheme {
        kind: args.rounding.to_core(),
        int_threshold: args.int_threshold,
    };
    let chosen = scheme.apply(&solution.colour_values, graph.colours(), args.k);
    let segmentation = resegment(&graph, &chosen);
    let tokeniser = Tokeniser::from_colour_choice(
        &chosen,
        graph.colours(),
        parse_specials(&args.special_token),
        scheme.kind,
        args.k,
        pret.clone(),
        Provenance {
            graph_hash: graph.content_hash(),
            lp_value: Some(solution.objective),
            solver: Some(SolverStats {
                iterations: solution.iterations as u64,
                gap: solution.duality_gap,
            }),
        },
    )?;
    tokeniser.save(&args.output)?;

    let mut manifest = RunManifest::new("train-convextok");
    manifest.flag("k", args.k);
    manifest.flag("rounding", scheme.kind.as_str());
    manifest.flag("int_threshold", args.int_threshold);
    manifest.flag("output", args.output.display().to_string());
    manifest.flag(
        "special_tokens",
        parse_specials(&args.special_token)
            .iter()
            .map(|s| s.name.clone())
            .collect::<Vec<_>>(),
    );
    record_corpus_opts(&mut manifest, &args.corpus_opts, &pret);
    args.policy.record(&mut manifest);
    args.solver.record(&mut manifest);
    manifest.flag(
        "dump_graph",
        args.dump_graph.as_ref().map(|p| p.display().to_string()),
    );
    manifest.flag(
        "dump_lp",
        args.dump_lp.as_ref().map(|p| p.display().to_string()),
    );
    manifest.flag("timings", args.timings);
    manifest.inputs.push(FileHash::of(&args.corpus)?);
    manifest.graph_hash = Some(graph.content_hash());
    manifest.solver = Some(solver_summary(args.k, &solution));
    manifest.outputs.push(FileHash::of(&args.output)?);
    if args.timings {
        let mut timings = BTreeMap::new();
        timings.insert("corpus_secs".to_string(), t_corpus.as_secs_f64());
        timings.insert(
            "assemble_secs".to_string(),
            (t_assemble - t_corpus).as_secs_f64(),
        );
        timings.insert("solve_secs".to_string(), (t_solve - t_assemble).as_secs_f64());
        timings.insert("total_secs".to_string(), started.elapsed().as_secs_f64());
        manifest.timings_secs = Some(timings);
    }
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(&args.output));
    manifest.write(&manifest_path)?;

    let ratio = 100.0 * segmentation.objective as f64 / solution.objective;
    if json {
        println!(
            "{}",
            json!({
                "pretokens": table.len(),
                "total_bytes": table.total_bytes(),
                "colours": graph.colours().len(),
                "lp_value": solution.objective,
                "dual_value": solution.dual_objective,
                "duality_gap": solution.duality_gap,
                "iterations": solution.iterations,
                "converged": solution.converged,
                "rounding": scheme.kind.as_str(),
                "learned": tokeniser.learned().len(),
                "objective": segmentation.objective,
                "gap_ratio_pct": ratio,
                "tokeniser": args.output.display().to_string(),
                "manifest": manifest_path.display().to_string(),
            })
        );
    } else {
        println!(
            "pretokens {}  total_bytes {}  colours {}",
            table.len(),
            table.total_bytes(),
            graph.colours().len()
        );
        println!(
            "lp_value {:.6}  dual {:.6}  gap {:.3e}  iterations {}  converged {}",
            solution.objective,
            solution.dual_objective,
            solution.duality_gap,
            solution.iterations,
            solution.converged
        );
        println!(
            "rounding {}  learned {}  objective {}  ratio {:.3}%",
            scheme.kind.as_str(),
            tokeniser.learned().len(),
            segmentation.objective,
            ratio
        );
        println!("wrote {}", args.output.display());
        println!("wrote {}", manifest_path.display());
    }
    Ok(())
}

pub fn train_bpe(args: &TrainBpeArgs, json: bool) -> Result<()> {
    let started = Instant::now();
    let pret = resolve_pretokenizer(&args.corpus_opts.pretokenizer)?;
    let table = load_table(&args.corpus, &args.corpus_opts, &pret)?;
    if table.is_empty() {
        return Err(toklp_core::Error::EmptyTable.into());
    }
    let tokeniser = toklp_core::tokeniser::train_bpe(
        &table,
        args.k,
        parse_specials(&args.special_token),
        pret.clone(),
    )?;
    tokeniser.save(&args.output)?;
    let objective = corpus_objective(&tokeniser, &table);

    let mut manifest = RunManifest::new("train-bpe");
    manifest.flag("k", args.k);
    manifest.flag("output", args.output.display().to_string());
    manifest.flag(
        "special_tokens",
        parse_specials(&args.special_token)
            .iter()
            .map(|s| s.name.clone())
            .collect::<Vec<_>>(),
    );
    record_corpus_opts(&mut manifest, &args.corpus_opts, &pret);
    manifest.flag("timings", args.timings);
    manifest.inputs.push(FileHash::of(&args.corpus)?);
    manifest.graph_hash = Some(tokeniser.provenance().graph_hash.clone());
    manifest.outputs.push(FileHash::of(&args.output)?);
    if args.timings {
        let mut timings = BTreeMap::new();
        timings.insert("total_secs".to_string(), started.elapsed().as_secs_f64());
        manifest.timings_secs = Some(timings);
    }
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(&args.output));
    manifest.write(&manifest_path)?;

    if json {
        println!(
            "{}",
            json!({
                "pretokens": table.len(),
                "total_bytes": table.total_bytes(),
                "learned": tokeniser.learned().len(),
                "objective": objective,
                "tokeniser": args.output.display().to_string(),
                "manifest": manifest_path.display().to_string(),
            })
        );
    } else {
        println!(
            "pretokens {}  total_bytes {}  learned {}  objective {}",
            table.len(),
            table.total_bytes(),
            tokeniser.learned().len(),
            objective
        );
        println!("wrote {}", args.output.display());
        println!("wrote {}", manifest_path.display());
    }
    Ok(())
}

fn read_input(input: &Option<PathBuf>) -> Result<Vec<u8>> {
    match input {
        Some(path) => {
            std::fs::read(path).with_context(|| format!("reading {}", path.display()))
        }
        None => {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf).context("reading stdin")?;
            Ok(buf)
        }
    }
}

fn write_output(output: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).context("writing stdout")?;
            stdout.flush().context("flushing stdout")
        }
    }
}

pub fn encode(args: &CodecArgs) -> Result<()> {
    let tokeniser = Tokeniser::load(&args.tokeniser)?;
    let text = read_input(&args.input)?;
    let tokens = tokeniser.encode(&text)?;
    let mut line = tokens
        .ids
        .iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    line.push('\n');
    write_output(&args.output, line.as_bytes())
}

pub fn decode(args: &CodecArgs) -> Result<()> {
    let tokeniser = Tokeniser::load(&args.tokeniser)?;
    let text = String::from_utf8(read_input(&args.input)?)
        .map_err(|e| UsageError(format!("token id input is not UTF-8: {e}")))?;
    let mut ids = Vec::new();
    for word in text.split_whitespace() {
        let id: u32 = word
            .parse()
            .map_err(|_| UsageError(format!("not a token id: {word:?}")))?;
        ids.push(id);
    }
    let bytes = tokeniser.decode(&toklp_core::tokeniser::TokenString { ids })?;
    write_output(&args.output, &bytes)
}

fn build_graph_for(
    table: &PretokenTable,
    policy: &PolicyOpts,
) -> Result<TokenisationGraph> {
    Ok(build_graph(table, &policy.to_core())?)
}

pub fn certify(args: &CertifyArgs, json: bool) -> Result<()> {
    // Pure-arithmetic mode: both values given, nothing to load.
    if let (Some(tokenised), Some(lp)) = (args.tokenised_value, args.lp_value) {
        let cert = certify_values(tokenised, lp)?;
        return print_certificate(&cert, None, json);
    }
    let (Some(tok_path), Some(corpus)) = (&args.tokeniser, &args.corpus) else {
        return Err(UsageError(
            "certify needs TOKENISER and CORPUS, or both --tokenised-value and --lp-value"
                .to_string(),
        )
        .into());
    };
    let tokeniser = Tokeniser::load(tok_path)?;
    let pret = tokeniser.pretokenizer().clone();
    let table = load_table(corpus, &args.corpus_opts, &pret)?;
    let tokenised = match args.tokenised_value {
        Some(v) => v,
        None => corpus_objective(&tokeniser, &table) as f64,
    };

    let cert = if let Some(lp) = args.lp_value {
        certify_values(tokenised, lp)?
    } else if args.fresh {
        let graph = build_graph_for(&table, &args.policy)?;
        let problem = assemble_lp(&graph, tokeniser.budget())?;
        let solution = solve_pdhg(&problem, &args.solver.to_core())?;
        if !solution.converged {
            eprintln!("warning: fresh solve did not converge; the bound is not certified");
        }
        certify_values(tokenised, solution.objective)?
    } else {
        let Some(lp) = tokeniser.provenance().lp_value else {
            return Err(UsageError(
                "tokeniser has no stored LP value; pass --lp-value or --fresh".to_string(),
            )
            .into());
        };
        // The stored bound only applies to the configuration it was computed
        // for; rebuild the graph and compare fingerprints.
        let graph = build_graph_for(&table, &args.policy)?;
        toklp_core::metrics::certify(
            &tokeniser,
            &table,
            lp,
            Some(graph.content_hash().as_str()),
        )?;
        certify_values(tokenised, lp)?
    };
    print_certificate(&cert, Some(&tokeniser), json)
}

fn print_certificate(
    cert: &toklp_core::metrics::Certificate,
    tokeniser: Option<&Tokeniser>,
    json: bool,
) -> Result<()> {
    let method = tokeniser.map(|t| t.method().name()).unwrap_or("-");
    if json {
        println!(
            "{}",
            json!({
                "method": method,
                "lp_value": cert.lp_value,
                "tokenised_value": cert.tokenised_value,
                "gap_ratio_pct": cert.gap_ratio,
            })
        );
    } else {
        println!("method           {method}");
        println!("lp_value         {}", cert.lp_value);
        println!("tokenised_value  {}", cert.tokenised_value);
        println!("gap_ratio        {:.3}%", cert.gap_ratio);
        if cert.gap_ratio < 100.0 {
            println!(
                "note: ratio below 100% by {:.3e} (must lie within the solver's gap tolerance)",
                cert.shortfall()
            );
        }
    }
    Ok(())
}

fn parse_alphas(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("bad --alpha entry {s:?}")).into())
        })
        .collect()
}

pub fn metrics(args: &MetricsArgs, json: bool) -> Result<()> {
    let tokeniser = Tokeniser::load(&args.tokeniser)?;
    let pret = tokeniser.pretokenizer().clone();
    let alphas = parse_alphas(&args.alpha)?;
    let docs = load_documents(&args.corpus, &args.corpus_opts, &pret)?;
    let report = intrinsic_metrics(&tokeniser, &docs, &alphas)?;
    if json {
        println!("{}", serde_json::to_string(&report)?);
        return Ok(());
    }
    let renyi_headers: Vec<String> = report
        .renyi_entropy
        .iter()
        .map(|e| format!("renyi@{}", e.alpha))
        .collect();
    let mut headers = vec![
        "total_tokens".to_string(),
        "bytes_per_token".to_string(),
        "utilisation".to_string(),
        "type_token_ratio".to_string(),
    ];
    headers.extend(renyi_headers);
    headers.extend([
        "avg_rank".to_string(),
        "avg_len".to_string(),
        "tokens_per_doc".to_string(),
        "distinct".to_string(),
    ]);
    let mut values = vec![
        report.total_tokens.to_string(),
        format!("{:.4}", report.bytes_per_token),
        format!("{:.4}", report.vocabulary_utilisation),
        format!("{:.6}", report.type_token_ratio),
    ];
    values.extend(
        report
            .renyi_entropy
            .iter()
            .map(|e| format!("{:.4}", e.bits)),
    );
    values.extend([
        format!("{:.1}", report.avg_token_rank),
        format!("{:.4}", report.avg_token_length_bytes),
        format!("{:.2}", report.tokens_per_document),
        report.distinct_tokens_used.to_string(),
    ]);
    if args.csv {
        println!("{}", headers.join(","));
        println!("{}", values.join(","));
    } else {
        let widths: Vec<usize> = headers
            .iter()
            .zip(&values)
            .map(|(h, v)| h.len().max(v.len()))
            .collect();
        let head: Vec<String> = headers
            .iter()
            .zip(&widths)
            .map(|(h, w)| format!("{h:>w$}"))
            .collect();
        let row: Vec<String> = values
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        println!("{}", head.join("  "));
        println!("{}", row.join("  "));
    }
    Ok(())
}

pub fn stability(args: &StabilityArgs, json: bool) -> Result<()> {
    let mut vocabs = Vec::new();
    let mut names = Vec::new();
    for path in &args.tokenisers {
        let tok = Tokeniser::load(path)?;
        vocabs.push(tok.learned().to_vec());
        names.push(path.display().to_string());
    }
    let (matrix, mean) = jaccard_stability(&vocabs)?;
    if json {
        println!(
            "{}",
            json!({ "files": names, "matrix": matrix, "mean": mean })
        );
    } else if args.csv {
        println!("file,{}", names.join(","));
        for (name, row) in names.iter().zip(&matrix) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            println!("{name},{}", cells.join(","));
        }
        println!("mean,{mean:.6}");
    } else {
        for row in &matrix {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            println!("{}", cells.join(" "));
        }
        println!("mean {mean:.6}");
    }
    Ok(())
}

pub fn oracle(args: &OracleArgs, json: bool) -> Result<()> {
    let pret = resolve_pretokenizer(&args.corpus_opts.pretokenizer)?;
    let table = load_table(&args.corpus, &args.corpus_opts, &pret)?;
    let graph = build_graph_for(&table, &args.policy)?;
    let result = brute_force_ip(&graph, args.k, args.limit)?;
    if json {
        use base64::Engine;
        let b64 = base64::engine::general_purpose::STANDARD;
        println!(
            "{}",
            json!({
                "objective": result.objective,
                "k": args.k,
                "tokens": result
                    .tokens
                    .iter()
                    .map(|t| String::from_utf8_lossy(t).into_owned())
                    .collect::<Vec<_>>(),
                "tokens_b64": result
                    .tokens
                    .iter()
                    .map(|t| b64.encode(t))
                    .collect::<Vec<_>>(),
            })
        );
    } else {
        println!("optimum {}", result.objective);
        let rendered: Vec<String> = result
            .tokens
            .iter()
            .map(|t| String::from_utf8_lossy(t).into_owned())
            .collect();
        println!("colours {}", rendered.join(" "));
    }
    Ok(())
}
