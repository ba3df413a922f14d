//! Corpus compression objective, the compression-gap certificate against the
//! LP lower bound, the intrinsic metric suite, and vocabulary stability.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Document, PretokenTable};
use crate::error::{Error, Result};
use crate::tokeniser::{Tokeniser, ALPHABET_SIZE};

/// Weighted token count of the table under a tokeniser: the compression
/// objective `sum over pretokens of count * |encode(pretoken)|`.
pub fn corpus_objective(tok: &Tokeniser, table: &PretokenTable) -> u64 {
    table
        .entries()
        .par_iter()
        .map(|(bytes, count)| count * tok.encode_pretoken(bytes).len() as u64)
        .sum()
}

/// A compression-gap certificate: how far a tokenised value sits above the
/// LP lower bound, as a percentage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Certificate {
    pub lp_value: f64,
    pub tokenised_value: f64,
    /// `100 * tokenised / lp`; at least 100% up to solver tolerance.
    pub gap_ratio: f64,
}

impl Certificate {
    /// Relative shortfall below 100%, zero when the ratio is at or above it.
    pub fn shortfall(&self) -> f64 {
        ((100.0 - self.gap_ratio) / 100.0).max(0.0)
    }

    /// A sub-100% ratio is consistent only if it stays within the solver's
    /// reported relative gap.
    pub fn is_consistent(&self, solver_relative_gap: f64) -> bool {
        self.shortfall() <= solver_relative_gap.abs() + f64::EPSILON
    }
}

/// Pure-arithmetic certificate from two already-known values.
pub fn certify_values(tokenised_value: f64, lp_value: f64) -> Result<Certificate> {
    if !lp_value.is_finite() || lp_value <= 0.0 {
        return Err(Error::InvalidArgument {
            message: format!("LP value must be positive, got {lp_value}"),
        });
    }
    Ok(Certificate {
        lp_value,
        tokenised_value,
        gap_ratio: 100.0 * tokenised_value / lp_value,
    })
}

/// Certifies a tokeniser against an LP lower bound computed for the same
/// graph configuration.
///
/// When `current_graph_hash` is given (the hash of the graph the LP value
/// belongs to), it must match the tokeniser's stored provenance; a mismatch
/// means the bound does not apply to this corpus/configuration.
pub fn certify(
    tok: &Tokeniser,
    table: &PretokenTable,
    lp_value: f64,
    current_graph_hash: Option<&str>,
) -> Result<Certificate> {
    if let Some(hash) = current_graph_hash {
        if tok.provenance().graph_hash != hash {
            return Err(Error::ConfigMismatch {
                message: format!(
                    "tokeniser was trained on graph {} but the certificate corpus hashes to {hash}",
                    tok.provenance().graph_hash
                ),
            });
        }
    }
    certify_values(corpus_objective(tok, table) as f64, lp_value)
}

/// Rényi entropy of a distribution in bits: `(1/(1-a)) log2 sum p^a`, with
/// the Shannon entropy as the continuous limit at `a = 1`.
pub fn renyi_entropy(dist: &[f64], alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidDistribution {
            message: format!("alpha must be positive, got {alpha}"),
        });
    }
    if dist.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::InvalidDistribution {
            message: "probabilities must be non-negative".to_string(),
        });
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution {
            message: format!("probabilities sum to {total}, not 1"),
        });
    }
    if alpha == 1.0 {
        let h = -dist
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>();
        Ok(h.max(0.0))
    } else {
        let power_sum: f64 = dist.iter().map(|&p| p.powf(alpha)).sum();
        Ok(power_sum.log2() / (1.0 - alpha))
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct RenyiEntry {
    pub alpha: f64,
    pub bits: f64,
}

/// Intrinsic metric bundle for one tokeniser on one evaluation corpus.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub total_tokens: u64,
    pub total_bytes: u64,
    pub bytes_per_token: f64,
    pub vocabulary_utilisation: f64,
    pub type_token_ratio: f64,
    pub renyi_entropy: Vec<RenyiEntry>,
    pub avg_token_rank: f64,
    pub avg_token_length_bytes: f64,
    pub tokens_per_document: f64,
    pub distinct_tokens_used: u64,
}

impl MetricsReport {
    /// Computes the bundle from raw occurrence counts. `countable_vocab` is
    /// the vocabulary size the utilisation is measured against (alphabet plus
    /// learned tokens; specials excluded).
    pub fn from_counts(
        counts: &HashMap<u32, u64>,
        countable_vocab: u64,
        num_documents: u64,
        total_bytes: u64,
        alphas: &[f64],
    ) -> Result<Self> {
        let total_tokens: u64 = counts.values().sum();
        if total_tokens == 0 || num_documents == 0 || countable_vocab == 0 {
            return Err(Error::InvalidArgument {
                message: "metrics need a non-empty evaluation corpus".to_string(),
            });
        }
        let distinct = counts.len() as u64;

        // Competition ranking over frequencies: most frequent is rank 1 and
        // ties share the lower (better) rank.
        let mut freq: Vec<u64> = counts.values().copied().collect();
        freq.sort_unstable_by(|a, b| b.cmp(a));
        let mut rank_weighted = 0u128;
        let mut i = 0usize;
        while i < freq.len() {
            let mut j = i;
            while j < freq.len() && freq[j] == freq[i] {
                j += 1;
            }
            let rank = (i + 1) as u128;
            for f in &freq[i..j] {
                rank_weighted += rank * u128::from(*f);
            }
            i = j;
        }
        let avg_token_rank = rank_weighted as f64 / total_tokens as f64;

        let dist: Vec<f64> = freq
            .iter()
            .map(|&f| f as f64 / total_tokens as f64)
            .collect();
        let renyi = alphas
            .iter()
            .map(|&alpha| {
                Ok(RenyiEntry {
                    alpha,
                    bits: renyi_entropy(&dist, alpha)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let bytes_per_token = total_bytes as f64 / total_tokens as f64;
        Ok(Self {
            total_tokens,
            total_bytes,
            bytes_per_token,
            vocabulary_utilisation: distinct as f64 / countable_vocab as f64,
            type_token_ratio: distinct as f64 / total_tokens as f64,
            renyi_entropy: renyi,
            avg_token_rank,
            avg_token_length_bytes: bytes_per_token,
            tokens_per_document: total_tokens as f64 / num_documents as f64,
            distinct_tokens_used: distinct,
        })
    }
}

/// Encodes the evaluation corpus and computes the intrinsic metric suite.
pub fn intrinsic_metrics(
    tok: &Tokeniser,
    docs: &[Document],
    alphas: &[f64],
) -> Result<MetricsReport> {
    let counts = docs
        .par_iter()
        .map(|doc| {
            let mut local: HashMap<u32, u64> = HashMap::new();
            let ids = tok.encode(&doc.bytes)?;
            for id in ids.ids {
                *local.entry(id).or_insert(0) += 1;
            }
            Ok(local)
        })
        .try_reduce(HashMap::new, |mut a, b| {
            for (id, c) in b {
                *a.entry(id).or_insert(0) += c;
            }
            Ok(a)
        })?;
    let total_bytes: u64 = docs.iter().map(|d| d.bytes.len() as u64).sum();
    let countable_vocab = (ALPHABET_SIZE + tok.learned().len()) as u64;
    MetricsReport::from_counts(
        &counts,
        countable_vocab,
        docs.len() as u64,
        total_bytes,
        alphas,
    )
}

/// Pairwise Jaccard similarity over learned-token sets, and the mean over
/// distinct pairs. The shared alphabet and specials are excluded so the
/// statistic reflects what training actually decided.
pub fn jaccard_stability(vocabs: &[Vec<Vec<u8>>]) -> Result<(Vec<Vec<f64>>, f64)> {
    if vocabs.len() < 2 {
        return Err(Error::InvalidArgument {
            message: "stability needs at least two vocabularies".to_string(),
        });
    }
    let sets: Vec<std::collections::BTreeSet<&[u8]>> = vocabs
        .iter()
        .map(|v| v.iter().map(|t| t.as_slice()).collect())
        .collect();
    let n = sets.len();
    let mut matrix = vec![vec![1.0f64; n]; n];
    let mut sum = 0.0;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let inter = sets[i].intersection(&sets[j]).count() as f64;
            let union = sets[i].union(&sets[j]).count() as f64;
            let jac = if union == 0.0 { 1.0 } else { inter / union };
            matrix[i][j] = jac;
            matrix[j][i] = jac;
            sum += jac;
            pairs += 1;
        }
    }
    Ok((matrix, sum / pairs as f64))
}
