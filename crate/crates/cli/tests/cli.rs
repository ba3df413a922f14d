//! End-to-end checks of the `toklp` binary: subcommand behaviour, file
//! formats, exit codes, and structured errors.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_toklp")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("toklp-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_catalogue(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.txt");
    std::fs::write(&path, "abc\nabd\nabe\nbc\nbd\nbe\n").unwrap();
    path
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn oracle_prints_certified_optimum() {
    let dir = scratch("oracle");
    write_catalogue(&dir);
    let out = run_in(
        &dir,
        &["oracle", "corpus.txt", "--k", "3", "--pretokenizer", "whitespace"],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    let text = stdout_str(&out);
    assert!(text.contains("optimum 9"), "{text}");
    assert!(text.contains("colours bc bd be"), "{text}");
}

#[test]
fn train_convextok_writes_tokeniser_and_manifest() {
    let dir = scratch("train-ct");
    write_catalogue(&dir);
    let out = run_in(
        &dir,
        &[
            "train-convextok",
            "corpus.txt",
            "--k",
            "3",
            "-o",
            "tok.json",
            "--pretokenizer",
            "whitespace",
            "--max-token-len",
            "0",
            "--dump-graph",
            "graph.txt",
            "--dump-lp",
            "problem.lp",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    assert!(dir.join("tok.json").exists());
    assert!(dir.join("tok.json.manifest.json").exists());
    assert!(dir.join("graph.txt").exists());
    assert!(dir.join("problem.lp").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tok.json.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "train-convextok");
    assert_eq!(manifest["solver"]["converged"], true);
    assert!(manifest.get("timings_secs").is_none());
    let lp_text = std::fs::read_to_string(dir.join("problem.lp")).unwrap();
    assert!(lp_text.starts_with("Minimize"));
}

#[test]
fn train_convextok_budget_zero_is_byte_level() {
    let dir = scratch("k0");
    write_catalogue(&dir);
    let out = run_in(
        &dir,
        &[
            "--json",
            "train-convextok",
            "corpus.txt",
            "--k",
            "0",
            "-o",
            "tok.json",
            "--pretokenizer",
            "whitespace",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert_eq!(summary["objective"], 15);
    assert_eq!(summary["total_bytes"], 15);
    assert_eq!(summary["learned"], 0);
}

#[test]
fn train_bpe_matches_catalogue_objective() {
    let dir = scratch("bpe");
    write_catalogue(&dir);
    let out = run_in(
        &dir,
        &[
            "--json",
            "train-bpe",
            "corpus.txt",
            "--k",
            "3",
            "-o",
            "bpe.json",
            "--pretokenizer",
            "whitespace",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert_eq!(summary["objective"], 10);
}

#[test]
fn encode_decode_round_trip_via_files() {
    let dir = scratch("codec");
    write_catalogue(&dir);
    run_in(
        &dir,
        &["train-bpe", "corpus.txt", "--k", "2", "-o", "tok.json"],
    );
    let text = "héllo wörld 🥐 abc abd\nsecond line\n";
    std::fs::write(dir.join("input.txt"), text).unwrap();
    let out = run_in(
        &dir,
        &["encode", "tok.json", "input.txt", "-o", "ids.txt"],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    let out = run_in(
        &dir,
        &["decode", "tok.json", "ids.txt", "-o", "roundtrip.txt"],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    assert_eq!(
        std::fs::read(dir.join("roundtrip.txt")).unwrap(),
        text.as_bytes()
    );
}

#[test]
fn certify_pure_arithmetic_mode() {
    let dir = scratch("certify");
    let out = run_in(
        &dir,
        &[
            "--json",
            "certify",
            "--tokenised-value",
            "431045026",
            "--lp-value",
            "427366252",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    let ratio = summary["gap_ratio_pct"].as_f64().unwrap();
    assert!((ratio - 100.860).abs() <= 0.001);
}

#[test]
fn certify_uses_stored_bound_and_detects_mismatch() {
    let dir = scratch("certify-stored");
    write_catalogue(&dir);
    let out = run_in(
        &dir,
        &[
            "--json",
            "train-convextok",
            "corpus.txt",
            "--k",
            "3",
            "-o",
            "tok.json",
            "--pretokenizer",
            "whitespace",
            "--max-token-len",
            "0",
        ],
    );
    let train: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    // Same corpus and policy: stored bound applies.
    let out = run_in(
        &dir,
        &[
            "--json",
            "certify",
            "tok.json",
            "corpus.txt",
            "--max-token-len",
            "0",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert!(summary["gap_ratio_pct"].as_f64().unwrap() >= 100.0 - 1e-4);
    // Pipeline equivalence: certify recomputes exactly the objective the
    // training resegmentation reported.
    assert_eq!(
        summary["tokenised_value"].as_f64().unwrap(),
        train["objective"].as_f64().unwrap()
    );

    // Different corpus: the stored bound no longer applies.
    std::fs::write(dir.join("other.txt"), "zz\nyy\n").unwrap();
    let out = run_in(
        &dir,
        &[
            "certify",
            "tok.json",
            "other.txt",
            "--max-token-len",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_str(&out).contains("config-mismatch"), "{}", stderr_str(&out));

    // A fresh solve sidesteps the stored provenance.
    let out = run_in(
        &dir,
        &[
            "certify",
            "tok.json",
            "other.txt",
            "--fresh",
            "--max-token-len",
            "0",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
}

#[test]
fn metrics_emits_parsable_json_and_csv() {
    let dir = scratch("metrics");
    write_catalogue(&dir);
    run_in(
        &dir,
        &["train-bpe", "corpus.txt", "--k", "3", "-o", "tok.json"],
    );
    let out = run_in(&dir, &["--json", "metrics", "tok.json", "corpus.txt"]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert!(report["total_tokens"].as_u64().unwrap() > 0);
    assert_eq!(report["renyi_entropy"][0]["alpha"], 1.0);
    assert_eq!(report["renyi_entropy"][1]["alpha"], 2.5);

    let out = run_in(
        &dir,
        &["metrics", "tok.json", "corpus.txt", "--csv", "--alpha", "1"],
    );
    let text = stdout_str(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("total_tokens,"));
}

#[test]
fn stability_compares_vocabularies() {
    let dir = scratch("stability");
    write_catalogue(&dir);
    run_in(
        &dir,
        &["train-bpe", "corpus.txt", "--k", "3", "-o", "a.json"],
    );
    run_in(
        &dir,
        &["train-bpe", "corpus.txt", "--k", "3", "-o", "b.json"],
    );
    let out = run_in(&dir, &["--json", "stability", "a.json", "b.json"]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert_eq!(summary["mean"], 1.0);
}

#[test]
fn jsonl_records_and_lenient_skipping() {
    let dir = scratch("jsonl");
    std::fs::write(
        dir.join("data.jsonl"),
        "{\"text\":\"abc\"}\nnot json\n{\"text\":\"bc\"}\n",
    )
    .unwrap();
    // Lenient (default): the malformed line is reported and skipped.
    let out = run_in(
        &dir,
        &[
            "--json",
            "train-bpe",
            "data.jsonl",
            "--k",
            "1",
            "-o",
            "tok.json",
            "--format",
            "jsonl",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    assert!(stderr_str(&out).contains("line 2"));
    let summary: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert_eq!(summary["total_bytes"], 5);

    // Strict: the malformed line aborts the run.
    let out = run_in(
        &dir,
        &[
            "train-bpe",
            "data.jsonl",
            "--k",
            "1",
            "-o",
            "tok.json",
            "--format",
            "jsonl",
            "--strict",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_str(&out).contains("format-error"));
}

#[test]
fn exit_codes_and_structured_errors() {
    let dir = scratch("errors");
    // Data error: missing file.
    let out = run_in(&dir, &["oracle", "missing.txt", "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_str(stderr_str(&out).trim()).unwrap();
    assert_eq!(err["error"], "io-error");

    // Usage error from argument combination validation.
    let out = run_in(&dir, &["certify"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr_str(&out).trim()).unwrap();
    assert_eq!(err["error"], "usage-error");

    // Usage error from the parser itself.
    let out = run_in(&dir, &["definitely-not-a-subcommand"]);
    assert_eq!(out.status.code(), Some(2));

    // Corrupt tokeniser file.
    std::fs::write(dir.join("bad.json"), "{\"format_version\":1").unwrap();
    let out = run_in(&dir, &["encode", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_str(stderr_str(&out).trim()).unwrap();
    assert_eq!(err["error"], "checksum-error");
}

#[test]
fn custom_pretokenizer_pattern_from_file() {
    let dir = scratch("pattern");
    std::fs::write(dir.join("pattern.txt"), "[a-z]+\n").unwrap();
    std::fs::write(dir.join("corpus.txt"), "ab12ab\n").unwrap();
    let out = run_in(
        &dir,
        &[
            "--json",
            "train-bpe",
            "corpus.txt",
            "--k",
            "1",
            "-o",
            "tok.json",
            "--pretokenizer",
            "pattern.txt",
        ],
    );
    assert!(out.status.success(), "{}", stderr_str(&out));
    // Pretokens: "ab", "12", "ab" -> first merge is "ab".
    let tok: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tok.json")).unwrap()).unwrap();
    assert!(tok["pretokenizer_preset"]
        .as_str()
        .unwrap()
        .starts_with("regex:"));
    // The stored pattern round-trips through encode.
    std::fs::write(dir.join("in.txt"), "ab12").unwrap();
    let out = run_in(&dir, &["encode", "tok.json", "in.txt", "-o", "ids.txt"]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let out = run_in(&dir, &["decode", "tok.json", "ids.txt"]);
    assert_eq!(out.stdout, b"ab12");
}
