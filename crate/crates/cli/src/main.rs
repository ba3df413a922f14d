//! `toklp`: train, inspect, and certify byte-level tokenisers built by
//! linear programming, with a BPE baseline.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "toklp",
    version,
    about = "Tokeniser construction via a flow LP: train, encode, certify"
)]
struct Cli {
    /// Thread ceiling for parallel sections (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Reserved; the pipeline is deterministic and takes no randomness
    #[arg(long, global = true, value_name = "SEED", hide = true)]
    seed: Option<u64>,

    /// Emit machine-readable JSON on stdout
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a tokeniser by solving the vocabulary LP and rounding
    TrainConvextok(TrainConvexTokArgs),
    /// Train the merge-based baseline tokeniser
    TrainBpe(TrainBpeArgs),
    /// Encode text (stdin or file) into token ids
    Encode(CodecArgs),
    /// Decode token ids back into bytes
    Decode(CodecArgs),
    /// Certify a tokeniser's compression against an LP lower bound
    Certify(CertifyArgs),
    /// Intrinsic metrics of a tokeniser on an evaluation corpus
    Metrics(MetricsArgs),
    /// Pairwise Jaccard similarity of learned vocabularies
    Stability(StabilityArgs),
    /// Exact optimum by exhaustive search, for tiny corpora
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Plain,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GapModeArg {
    Rel,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoundingArg {
    Det,
    Bias,
    Int,
}

#[derive(Args, Debug, Clone)]
struct CorpusOpts {
    /// Input format: one document per line, or JSONL with a "text" field
    #[arg(long, value_enum, default_value_t = FormatArg::Plain)]
    format: FormatArg,

    /// Pretokeniser: a preset name (gpt4, whitespace) or a file holding a regex
    #[arg(long, default_value = "gpt4", value_name = "PRESET|FILE")]
    pretokenizer: String,

    /// Abort on malformed records instead of skipping them
    #[arg(long)]
    strict: bool,

    /// Split documents longer than this at pretoken boundaries (0 = off)
    #[arg(long, default_value_t = 0, value_name = "BYTES")]
    max_doc_bytes: usize,
}

#[derive(Args, Debug, Clone)]
struct PolicyOpts {
    /// Longest admitted token in bytes (0 = unbounded)
    #[arg(long, default_value_t = 16, value_name = "BYTES")]
    max_token_len: usize,

    /// Drop candidate tokens with weighted occurrence count below this
    #[arg(long, default_value_t = 0, value_name = "COUNT")]
    min_colour_count: u64,
}

#[derive(Args, Debug, Clone)]
struct SolverOpts {
    /// Duality-gap tolerance
    #[arg(long, default_value_t = 1e-6, value_name = "TOL")]
    gap_tol: f64,

    /// Gap tolerance mode: relative or absolute
    #[arg(long, value_enum, default_value_t = GapModeArg::Rel)]
    gap_mode: GapModeArg,

    /// Scaled primal/dual residual tolerance
    #[arg(long, default_value_t = 1e-8, value_name = "TOL")]
    res_tol: f64,

    /// Iteration cap
    #[arg(long, default_value_t = 1_000_000, value_name = "N")]
    max_iters: usize,

    /// Disable diagonal preconditioning
    #[arg(long)]
    no_precond: bool,
}

#[derive(Args, Debug)]
struct TrainConvexTokArgs {
    /// Training corpus
    corpus: PathBuf,

    /// Vocabulary budget: number of learned tokens
    #[arg(long, value_name = "K")]
    k: usize,

    /// Output tokeniser file
    #[arg(short, long, default_value = "tokeniser.json", value_name = "PATH")]
    output: PathBuf,

    #[command(flatten)]
    corpus_opts: CorpusOpts,

    #[command(flatten)]
    policy: PolicyOpts,

    #[command(flatten)]
    solver: SolverOpts,

    /// Rounding scheme for the fractional colour vector
    #[arg(long, value_enum, default_value_t = RoundingArg::Det)]
    rounding: RoundingArg,

    /// Threshold for int rounding
    #[arg(long, default_value_t = 0.999, value_name = "X")]
    int_threshold: f64,

    /// Special token, NAME or NAME=BYTES (repeatable)
    #[arg(long = "special-token", value_name = "SPEC")]
    special_token: Vec<String>,

    /// Write a plain-text graph dump here
    #[arg(long, value_name = "PATH")]
    dump_graph: Option<PathBuf>,

    /// Write the assembled LP in LP text format here
    #[arg(long, value_name = "PATH")]
    dump_lp: Option<PathBuf>,

    /// Manifest path (default: <output>.manifest.json)
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,

    /// Record wall-clock timings in the manifest (makes it run-dependent)
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct TrainBpeArgs {
    /// Training corpus
    corpus: PathBuf,

    /// Vocabulary budget: number of merges
    #[arg(long, value_name = "K")]
    k: usize,

    /// Output tokeniser file
    #[arg(short, long, default_value = "tokeniser.json", value_name = "PATH")]
    output: PathBuf,

    #[command(flatten)]
    corpus_opts: CorpusOpts,

    /// Special token, NAME or NAME=BYTES (repeatable)
    #[arg(long = "special-token", value_name = "SPEC")]
    special_token: Vec<String>,

    /// Manifest path (default: <output>.manifest.json)
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,

    /// Record wall-clock timings in the manifest (makes it run-dependent)
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct CodecArgs {
    /// Tokeniser file
    tokeniser: PathBuf,

    /// Input file (default: stdin)
    input: Option<PathBuf>,

    /// Output file (default: stdout)
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Tokeniser file (omit in pure-arithmetic mode)
    tokeniser: Option<PathBuf>,

    /// Corpus to certify on (omit in pure-arithmetic mode)
    corpus: Option<PathBuf>,

    /// Use this LP lower bound instead of the stored or recomputed one
    #[arg(long, value_name = "V")]
    lp_value: Option<f64>,

    /// Use this tokenised value (with --lp-value: no corpus needed)
    #[arg(long, value_name = "V")]
    tokenised_value: Option<f64>,

    /// Re-solve the LP on this corpus instead of trusting stored provenance
    #[arg(long)]
    fresh: bool,

    #[command(flatten)]
    corpus_opts: CorpusOpts,

    #[command(flatten)]
    policy: PolicyOpts,

    #[command(flatten)]
    solver: SolverOpts,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Tokeniser file
    tokeniser: PathBuf,

    /// Evaluation corpus
    corpus: PathBuf,

    /// Comma-separated Rényi entropy orders
    #[arg(long, default_value = "1,2.5", value_name = "LIST")]
    alpha: String,

    #[command(flatten)]
    corpus_opts: CorpusOpts,

    /// Emit one CSV header and row instead of the aligned table
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    /// Two or more tokeniser files
    #[arg(required = true, num_args = 2..)]
    tokenisers: Vec<PathBuf>,

    /// Emit the matrix as CSV
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Corpus (tiny: the search is exhaustive)
    corpus: PathBuf,

    /// Vocabulary budget
    #[arg(long, value_name = "K")]
    k: usize,

    /// Refuse instances with more candidate tokens than this
    #[arg(long, default_value_t = toklp_core::lp::DEFAULT_ORACLE_LIMIT, value_name = "N")]
    limit: usize,

    #[command(flatten)]
    corpus_opts: CorpusOpts,

    #[command(flatten)]
    policy: PolicyOpts,
}

/// Marker for argument-combination problems discovered after clap parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // A later duplicate initialisation is harmless; first call wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let json = cli.json;
    let result = match cli.command {
        Command::TrainConvextok(args) => commands::train_convextok(&args, json),
        Command::TrainBpe(args) => commands::train_bpe(&args, json),
        Command::Encode(args) => commands::encode(&args),
        Command::Decode(args) => commands::decode(&args),
        Command::Certify(args) => commands::certify(&args, json),
        Command::Metrics(args) => commands::metrics(&args, json),
        Command::Stability(args) => commands::stability(&args, json),
        Command::Oracle(args) => commands::oracle(&args, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = classify(&err);
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "message": format!("{err:#}") })
            );
            ExitCode::from(code)
        }
    }
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    use toklp_core::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return ("usage-error", 2);
        }
        if let Some(core) = cause.downcast_ref::<E>() {
            let kind = match core {
                E::Io { .. } => "io-error",
                E::Format { .. } => "format-error",
                E::InvalidUtf8 { .. } => "invalid-utf8-error",
                E::Pattern { .. } => "pattern-error",
                E::EmptyTable => "empty-corpus",
                E::Overflow { .. } => "overflow-error",
                E::DimensionMismatch { .. } => "dimension-mismatch",
                E::TooLarge { .. } => "too-large-error",
                E::UnknownToken { .. } => "unknown-token",
                E::DuplicateSpecial { .. } => "duplicate-special-token",
                E::InvalidId { .. } => "invalid-id",
                E::SchemaVersion { .. } => "schema-version-error",
                E::Checksum { .. } => "checksum-error",
                E::ConfigMismatch { .. } => "config-mismatch",
                E::InvalidDistribution { .. } => "invalid-distribution",
                E::InvalidArgument { .. } => "invalid-argument",
            };
            return (kind, 1);
        }
    }
    ("error", 1)
}
