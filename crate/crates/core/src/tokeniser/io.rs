//! Tokeniser files: a single self-describing JSON document. Token bytes are
//! base64 so arbitrary byte content survives; a content checksum catches
//! truncated or edited files.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::corpus::Pretokenizer;
use crate::error::{Error, Result};
use crate::hash::fnv1a64_hex;
use crate::rounding::RoundingKind;
use crate::tokeniser::{Method, Provenance, SolverStats, SpecialToken, Tokeniser};

const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecialFile {
    name: String,
    bytes_b64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolverFile {
    iters: u64,
    gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProvenanceFile {
    graph_hash: String,
    lp_value: Option<f64>,
    solver: Option<SolverFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TokeniserFile {
    format_version: u64,
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounding: Option<String>,
    #[serde(rename = "K")]
    k: u64,
    pretokenizer_preset: String,
    specials: Vec<SpecialFile>,
    learned: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merges: Option<Vec<[String; 2]>>,
    provenance: ProvenanceFile,
    checksum: String,
}

impl Tokeniser {
    /// Serializes to the canonical single-line JSON document (plus a trailing
    /// newline). Serialization is deterministic, so save -> load -> save is
    /// byte-identical.
    pub fn to_json_string(&self) -> String {
        let (rounding, merges) = match self.method() {
            Method::ConvexTok { rounding } => (Some(rounding.as_str().to_string()), None),
            Method::Bpe { merges } => (
                None,
                Some(
                    merges
                        .iter()
                        .map(|(a, b)| [B64.encode(a), B64.encode(b)])
                        .collect(),
                ),
            ),
        };
        let mut file = TokeniserFile {
            format_version: FORMAT_VERSION,
            method: self.method().name().to_string(),
            rounding,
            k: self.budget() as u64,
            pretokenizer_preset: self.pretokenizer().spec().to_string(),
            specials: self
                .specials()
                .iter()
                .map(|s| SpecialFile {
                    name: s.name.clone(),
                    bytes_b64: B64.encode(&s.bytes),
                })
                .collect(),
            learned: self.learned().iter().map(|t| B64.encode(t)).collect(),
            merges,
            provenance: ProvenanceFile {
                graph_hash: self.provenance().graph_hash.clone(),
                lp_value: self.provenance().lp_value,
                solver: self.provenance().solver.map(|s| SolverFile {
                    iters: s.iterations,
                    gap: s.gap,
                }),
            },
            checksum: String::new(),
        };
        let unsigned = serde_json::to_string(&file).expect("serialization cannot fail");
        file.checksum = fnv1a64_hex(unsigned.as_bytes());
        let mut out = serde_json::to_string(&file).expect("serialization cannot fail");
        out.push('\n');
        out
    }

    /// Parses and validates a tokeniser document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let corrupt = |message: String| Error::Checksum { message };
        // Version is checked on the raw value first, so that documents from a
        // newer schema fail with a version error rather than a parse error.
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| corrupt(format!("unparseable or truncated: {e}")))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| corrupt("missing format_version".to_string()))?;
        if found != FORMAT_VERSION {
            return Err(Error::SchemaVersion {
                found,
                supported: FORMAT_VERSION,
            });
        }
        let file: TokeniserFile = serde_json::from_value(value)
            .map_err(|e| corrupt(format!("schema mismatch: {e}")))?;

        let mut unsigned = file.clone();
        unsigned.checksum = String::new();
        let expected = fnv1a64_hex(
            serde_json::to_string(&unsigned)
                .expect("serialization cannot fail")
                .as_bytes(),
        );
        if expected != file.checksum {
            return Err(corrupt(format!(
                "checksum mismatch: stored {}, computed {expected}",
                file.checksum
            )));
        }

        let decode = |s: &str| -> Result<Vec<u8>> {
            B64.decode(s)
                .map_err(|e| corrupt(format!("invalid base64: {e}")))
        };
        let method = match file.method.as_str() {
            "convextok" => {
                let kind = file
                    .rounding
                    .as_deref()
                    .and_then(RoundingKind::parse)
                    .ok_or_else(|| corrupt("missing or unknown rounding scheme".to_string()))?;
                Method::ConvexTok { rounding: kind }
            }
            "bpe" => {
                let mut merges = Vec::new();
                for [a, b] in file.merges.unwrap_or_default() {
                    merges.push((decode(&a)?, decode(&b)?));
                }
                Method::Bpe { merges }
            }
            other => return Err(corrupt(format!("unknown method {other:?}"))),
        };
        let specials = file
            .specials
            .iter()
            .map(|s| {
                Ok(SpecialToken {
                    name: s.name.clone(),
                    bytes: decode(&s.bytes_b64)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let learned = file
            .learned
            .iter()
            .map(|t| decode(t))
            .collect::<Result<Vec<_>>>()?;
        let pretokenizer = Pretokenizer::from_spec(&file.pretokenizer_preset)?;
        let provenance = Provenance {
            graph_hash: file.provenance.graph_hash,
            lp_value: file.provenance.lp_value,
            solver: file.provenance.solver.map(|s| SolverStats {
                iterations: s.iters,
                gap: s.gap,
            }),
        };
        Tokeniser::assemble(
            specials,
            learned,
            method,
            file.k as usize,
            pretokenizer,
            provenance,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }
}
