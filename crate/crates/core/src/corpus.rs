//! Corpus ingestion: documents, regex pretokenisation, and the deduplicated
//! weighted pretoken table everything downstream consumes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use fancy_regex::Regex;

use crate::error::{Error, Result};
use crate::hash::Fnv1a64;

/// GPT-4-style split pattern as used by nanochat. Matches are categorically
/// homogeneous chunks (contractions, letter runs with optional leading
/// non-letter, short digit runs, punctuation clusters, whitespace), so learned
/// tokens never straddle word-ish boundaries.
pub const GPT4_SPLIT_PATTERN: &str = r"'(?i:[sdmt]|ll|ve|re)|[^\r\n\p{L}\p{N}]?+\p{L}+|\p{N}{1,3}| ?[^\s\p{L}\p{N}]++[\r\n]*|\s*[\r\n]|\s+(?!\S)|\s+";

/// Minimal word splitter: a run of non-space bytes with one optional leading
/// space, or a whitespace run. Handy for small fixtures.
pub const WHITESPACE_SPLIT_PATTERN: &str = r" ?[^\s]+|\s+";

const PRESETS: &[(&str, &str)] = &[
    ("gpt4", GPT4_SPLIT_PATTERN),
    ("whitespace", WHITESPACE_SPLIT_PATTERN),
];

const CUSTOM_SPEC_PREFIX: &str = "regex:";

/// A compiled pretokenisation pattern plus the spec string it round-trips
/// through tokeniser files (`gpt4`, `whitespace`, or `regex:<literal>`).
#[derive(Debug, Clone)]
pub struct Pretokenizer {
    spec: String,
    pattern: String,
    regex: Regex,
}

impl Pretokenizer {
    /// Compiles a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        let pattern = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::Pattern {
                message: format!("unknown pretokenizer preset {name:?}"),
            })?;
        Self::compile(name.to_string(), pattern.to_string())
    }

    /// Compiles a literal regex source.
    pub fn from_pattern(pattern: &str) -> Result<Self> {
        Self::compile(
            format!("{CUSTOM_SPEC_PREFIX}{pattern}"),
            pattern.to_string(),
        )
    }

    /// Rebuilds a pretokenizer from its stored spec string.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if let Some(pattern) = spec.strip_prefix(CUSTOM_SPEC_PREFIX) {
            Self::from_pattern(pattern)
        } else {
            Self::preset(spec)
        }
    }

    fn compile(spec: String, pattern: String) -> Result<Self> {
        let regex = Regex::new(&pattern).map_err(|e| Error::Pattern {
            message: e.to_string(),
        })?;
        Ok(Self {
            spec,
            pattern,
            regex,
        })
    }

    /// The self-describing spec string stored in tokeniser files.
    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    /// Splits `text` into pretokens along the pattern's match boundaries.
    ///
    /// The returned slices concatenate back to `text` exactly: any residue the
    /// pattern does not match is emitted as its own pretoken between matches.
    pub fn pretokenise<'a>(&self, text: &'a [u8]) -> Result<Vec<&'a [u8]>> {
        let s = std::str::from_utf8(text).map_err(|e| Error::InvalidUtf8 {
            context: e.to_string(),
        })?;
        let mut out = Vec::new();
        let mut prev = 0usize;
        for m in self.regex.find_iter(s) {
            let m = m.map_err(|e| Error::Pattern {
                message: e.to_string(),
            })?;
            if m.start() > prev {
                out.push(&text[prev..m.start()]);
            }
            if m.end() > m.start() {
                out.push(&text[m.start()..m.end()]);
                prev = m.end();
            }
        }
        if prev < text.len() {
            out.push(&text[prev..]);
        }
        Ok(out)
    }
}

/// One input record: a line of a plain-text file or one JSONL `text` field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    PlainLines,
    JsonlTextField,
}

/// Streams documents from `path`, one per line (plain) or per record (jsonl).
/// Malformed JSONL lines surface as `Error::Format` items carrying the line
/// number; the caller decides whether to skip or abort.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
) -> Result<impl Iterator<Item = Result<Document>>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let path: PathBuf = path.to_path_buf();
    let mut line_no = 0u64;
    Ok(reader.lines().map(move |line| {
        line_no += 1;
        let line = line.map_err(|source| match source.kind() {
            std::io::ErrorKind::InvalidData => Error::InvalidUtf8 {
                context: format!("{}:{line_no}", path.display()),
            },
            _ => Error::Io {
                path: path.clone(),
                source,
            },
        })?;
        match format {
            CorpusFormat::PlainLines => Ok(Document {
                id: format!("line-{line_no}"),
                bytes: line.into_bytes(),
            }),
            CorpusFormat::JsonlTextField => {
                let value: serde_json::Value =
                    serde_json::from_str(&line).map_err(|e| Error::Format {
                        line: line_no,
                        message: format!("malformed JSON: {e}"),
                    })?;
                let text = value
                    .get("text")
                    .and_then(|t| t.as_str())
                    .ok_or(Error::Format {
                        line: line_no,
                        message: "missing string field \"text\"".to_string(),
                    })?;
                Ok(Document {
                    id: format!("line-{line_no}"),
                    bytes: text.as_bytes().to_vec(),
                })
            }
        }
    }))
}

/// Deduplicated multiset of pretokens with occurrence counts.
///
/// Entry order is first-occurrence order, which fixes every downstream index
/// (graph blocks, LP columns) bit-for-bit across runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretokenTable {
    entries: Vec<(Vec<u8>, u64)>,
    index: HashMap<Vec<u8>, usize>,
    seen_bytes: [bool; 256],
    total_bytes: u64,
}

impl PretokenTable {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
            seen_bytes: [false; 256],
            total_bytes: 0,
        }
    }

    /// Builds a table directly from (pretoken, count) pairs; counts of equal
    /// pretokens accumulate. Mostly useful for fixtures and tests.
    pub fn from_counts<I, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (B, u64)>,
        B: AsRef<[u8]>,
    {
        let mut table = Self::new();
        for (bytes, count) in pairs {
            table.add(bytes.as_ref(), count);
        }
        table
    }

    pub fn add(&mut self, pretoken: &[u8], count: u64) {
        debug_assert!(!pretoken.is_empty(), "pretokens are non-empty");
        debug_assert!(count >= 1);
        self.total_bytes += count * pretoken.len() as u64;
        if let Some(&i) = self.index.get(pretoken) {
            self.entries[i].1 += count;
        } else {
            for &b in pretoken {
                self.seen_bytes[b as usize] = true;
            }
            self.index.insert(pretoken.to_vec(), self.entries.len());
            self.entries.push((pretoken.to_vec(), count));
        }
    }

    pub fn entries(&self) -> &[(Vec<u8>, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    /// Distinct byte values observed across all pretokens, ascending.
    pub fn alphabet(&self) -> Vec<u8> {
        (0u16..256)
            .filter(|&b| self.seen_bytes[b as usize])
            .map(|b| b as u8)
            .collect()
    }

    pub fn get(&self, pretoken: &[u8]) -> Option<(usize, u64)> {
        self.index.get(pretoken).map(|&i| (i, self.entries[i].1))
    }

    /// Deterministic fingerprint of the table contents.
    pub fn content_hash(&self) -> String {
        let mut h = Fnv1a64::new();
        h.update_u64(self.entries.len() as u64);
        for (bytes, count) in &self.entries {
            h.update_field(bytes);
            h.update_u64(*count);
        }
        h.finish_hex()
    }
}

impl Default for PretokenTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Pretokenises every document and accumulates the deduplicated table.
/// Document errors propagate unchanged; use [`skip_errors`] for lenient runs.
pub fn build_pretoken_table<I>(docs: I, pretokenizer: &Pretokenizer) -> Result<PretokenTable>
where
    I: IntoIterator<Item = Result<Document>>,
{
    let mut table = PretokenTable::new();
    for doc in docs {
        let doc = doc?;
        for pretoken in pretokenizer.pretokenise(&doc.bytes)? {
            table.add(pretoken, 1);
        }
    }
    Ok(table)
}

/// Wraps a document stream, reporting and dropping per-document errors
/// instead of aborting the run.
pub fn skip_errors<I, F>(docs: I, mut report: F) -> impl Iterator<Item = Result<Document>>
where
    I: IntoIterator<Item = Result<Document>>,
    F: FnMut(&Error),
{
    docs.into_iter().filter_map(move |doc| match doc {
        Ok(d) => Some(Ok(d)),
        Err(e) => {
            report(&e);
            None
        }
    })
}

/// Splits an oversized document into several documents at pretoken
/// boundaries, each at most `cap` bytes (a single pretoken longer than `cap`
/// stays intact). Token choices are unaffected because tokens never cross
/// pretoken boundaries anyway.
pub fn split_document(doc: &Document, pretokenizer: &Pretokenizer, cap: usize) -> Result<Vec<Document>> {
    if doc.bytes.len() <= cap {
        return Ok(vec![doc.clone()]);
    }
    let mut out = Vec::new();
    let mut chunk: Vec<u8> = Vec::new();
    for pretoken in pretokenizer.pretokenise(&doc.bytes)? {
        if !chunk.is_empty() && chunk.len() + pretoken.len() > cap {
            out.push(Document {
                id: format!("{}#{}", doc.id, out.len()),
                bytes: std::mem::take(&mut chunk),
            });
        }
        chunk.extend_from_slice(pretoken);
    }
    if !chunk.is_empty() {
        out.push(Document {
            id: format!("{}#{}", doc.id, out.len()),
            bytes: chunk,
        });
    }
    Ok(out)
}
