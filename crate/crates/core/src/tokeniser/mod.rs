//! The runnable tokeniser: vocabulary assembly from a colour choice, minimal
//! token-count encoding, decoding, and the mapping back to IP vectors.
//!
//! The vocabulary is always the 256 single-byte tokens, then the named
//! special tokens, then the learned tokens. Specials are never matched by
//! byte content during encoding; they only enter token-strings through
//! explicit ids.

mod bpe;
mod io;

pub use bpe::train_bpe;

use std::collections::HashMap;

use crate::corpus::Pretokenizer;
use crate::error::{Error, Result};
use crate::rounding::RoundingKind;
use crate::tokgraph::TokenisationGraph;

const BYTE_TABLE: [u8; 256] = {
    let mut t = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        t[i] = i as u8;
        i += 1;
    }
    t
};

pub const ALPHABET_SIZE: usize = 256;

/// A named token that is part of the vocabulary but never produced by
/// encoding plain text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialToken {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl SpecialToken {
    /// A special whose byte rendering is its own name.
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            bytes: name.as_bytes().to_vec(),
        }
    }
}

/// How the vocabulary was constructed, and what the encoder replays.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Learned via merge training; encoding replays `merges` in order.
    Bpe { merges: Vec<(Vec<u8>, Vec<u8>)> },
    /// Learned by rounding an LP solution; encoding runs the minimal
    /// token-count DP.
    ConvexTok { rounding: RoundingKind },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Bpe { .. } => "bpe",
            Method::ConvexTok { .. } => "convextok",
        }
    }
}

/// Solver statistics carried in tokeniser provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverStats {
    pub iterations: u64,
    pub gap: f64,
}

/// Where the vocabulary came from: the graph (or table) fingerprint and, for
/// LP-derived tokenisers, the relaxation value and solve statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub graph_hash: String,
    pub lp_value: Option<f64>,
    pub solver: Option<SolverStats>,
}

impl Provenance {
    pub fn bare(graph_hash: String) -> Self {
        Self {
            graph_hash,
            lp_value: None,
            solver: None,
        }
    }
}

/// A sequence of vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenString {
    pub ids: Vec<u32>,
}

impl TokenString {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Tokeniser {
    specials: Vec<SpecialToken>,
    learned: Vec<Vec<u8>>,
    method: Method,
    budget: usize,
    pretokenizer: Pretokenizer,
    provenance: Provenance,
    /// alphabet + learned bytes -> id; specials are deliberately absent.
    index: HashMap<Vec<u8>, u32>,
    max_learned_len: usize,
}

impl Tokeniser {
    /// Shared constructor; validates the vocabulary invariants.
    pub(crate) fn assemble(
        specials: Vec<SpecialToken>,
        learned: Vec<Vec<u8>>,
        method: Method,
        budget: usize,
        pretokenizer: Pretokenizer,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut names = std::collections::HashSet::new();
        for s in &specials {
            if !names.insert(s.name.clone()) {
                return Err(Error::DuplicateSpecial {
                    name: s.name.clone(),
                });
            }
        }
        let mut index: HashMap<Vec<u8>, u32> = HashMap::with_capacity(ALPHABET_SIZE + learned.len());
        for b in 0..ALPHABET_SIZE {
            index.insert(vec![b as u8], b as u32);
        }
        let mut max_learned_len = 1;
        for (i, token) in learned.iter().enumerate() {
            if token.len() < 2 {
                return Err(Error::InvalidArgument {
                    message: format!("learned token {:?} shorter than 2 bytes", token),
                });
            }
            let id = (ALPHABET_SIZE + specials.len() + i) as u32;
            if index.insert(token.clone(), id).is_some() {
                return Err(Error::InvalidArgument {
                    message: format!(
                        "duplicate learned token {:?}",
                        String::from_utf8_lossy(token)
                    ),
                });
            }
            max_learned_len = max_learned_len.max(token.len());
        }
        Ok(Self {
            specials,
            learned,
            method,
            budget,
            pretokenizer,
            provenance,
            index,
            max_learned_len,
        })
    }

    /// Builds a tokeniser from a rounded colour choice: the learned tokens
    /// are the chosen colours, in colour order.
    pub fn from_colour_choice(
        chosen: &[bool],
        colours: &[Vec<u8>],
        specials: Vec<SpecialToken>,
        rounding: RoundingKind,
        budget: usize,
        pretokenizer: Pretokenizer,
        provenance: Provenance,
    ) -> Result<Self> {
        if chosen.len() != colours.len() {
            return Err(Error::DimensionMismatch {
                what: "colour choice".to_string(),
                expected: colours.len(),
                got: chosen.len(),
            });
        }
        let learned: Vec<Vec<u8>> = chosen
            .iter()
            .zip(colours)
            .filter(|(&sel, _)| sel)
            .map(|(_, c)| c.clone())
            .collect();
        Self::assemble(
            specials,
            learned,
            Method::ConvexTok { rounding },
            budget,
            pretokenizer,
            provenance,
        )
    }

    pub fn vocab_size(&self) -> usize {
        ALPHABET_SIZE + self.specials.len() + self.learned.len()
    }

    pub fn specials(&self) -> &[SpecialToken] {
        &self.specials
    }

    pub fn learned(&self) -> &[Vec<u8>] {
        &self.learned
    }

    pub fn method(&self) -> &Method {
        &self.method
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn pretokenizer(&self) -> &Pretokenizer {
        &self.pretokenizer
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Id of a special token, for explicit injection by callers.
    pub fn special_id(&self, name: &str) -> Option<u32> {
        self.specials
            .iter()
            .position(|s| s.name == name)
            .map(|i| (ALPHABET_SIZE + i) as u32)
    }

    pub fn token_bytes(&self, id: u32) -> Result<&[u8]> {
        let id = id as usize;
        if id < ALPHABET_SIZE {
            return Ok(&BYTE_TABLE[id..=id]);
        }
        let rest = id - ALPHABET_SIZE;
        if rest < self.specials.len() {
            return Ok(&self.specials[rest].bytes);
        }
        self.learned
            .get(rest - self.specials.len())
            .map(|t| t.as_slice())
            .ok_or(Error::InvalidId {
                id: id as u32,
                vocab_size: self.vocab_size(),
            })
    }

    /// Encodes UTF-8 text: pretokenise with the stored pattern, then encode
    /// each pretoken independently.
    pub fn encode(&self, text: &[u8]) -> Result<TokenString> {
        let mut ids = Vec::new();
        for pretoken in self.pretokenizer.pretokenise(text)? {
            self.encode_pretoken_into(pretoken, &mut ids);
        }
        Ok(TokenString { ids })
    }

    /// Encodes one pretoken as a unit (tokens never cross pretoken
    /// boundaries). Always succeeds: the alphabet guarantees a segmentation.
    pub fn encode_pretoken(&self, pretoken: &[u8]) -> Vec<u32> {
        let mut ids = Vec::new();
        self.encode_pretoken_into(pretoken, &mut ids);
        ids
    }

    fn encode_pretoken_into(&self, pretoken: &[u8], out: &mut Vec<u32>) {
        match &self.method {
            Method::ConvexTok { .. } => self.encode_shortest_path(pretoken, out),
            Method::Bpe { merges } => self.encode_merge_replay(pretoken, merges, out),
        }
    }

    /// Minimal token-count DP over vocabulary substrings; ties resolved by
    /// taking the longest token first, left to right.
    fn encode_shortest_path(&self, pretoken: &[u8], out: &mut Vec<u32>) {
        let n = pretoken.len();
        if n == 0 {
            return;
        }
        let mut best = vec![usize::MAX; n + 1];
        let mut jump = vec![0usize; n + 1];
        best[n] = 0;
        for i in (0..n).rev() {
            let mut b = best[i + 1] + 1;
            let mut j_best = i + 1;
            let j_max = n.min(i + self.max_learned_len);
            for j in (i + 2)..=j_max {
                if self.index.contains_key(&pretoken[i..j]) {
                    let cand = best[j] + 1;
                    if cand < b || (cand == b && j > j_best) {
                        b = cand;
                        j_best = j;
                    }
                }
            }
            best[i] = b;
            jump[i] = j_best;
        }
        let mut pos = 0;
        while pos < n {
            let end = jump[pos];
            out.push(self.index[&pretoken[pos..end]]);
            pos = end;
        }
    }

    /// Replays the learned merge sequence in training order, replacing
    /// adjacent occurrences left to right.
    fn encode_merge_replay(
        &self,
        pretoken: &[u8],
        merges: &[(Vec<u8>, Vec<u8>)],
        out: &mut Vec<u32>,
    ) {
        let mut spans: Vec<(usize, usize)> = (0..pretoken.len()).map(|i| (i, i + 1)).collect();
        for (left, right) in merges {
            if spans.len() < 2 {
                break;
            }
            let mut merged = Vec::with_capacity(spans.len());
            let mut i = 0;
            while i < spans.len() {
                if i + 1 < spans.len()
                    && &pretoken[spans[i].0..spans[i].1] == left.as_slice()
                    && &pretoken[spans[i + 1].0..spans[i + 1].1] == right.as_slice()
                {
                    merged.push((spans[i].0, spans[i + 1].1));
                    i += 2;
                } else {
                    merged.push(spans[i]);
                    i += 1;
                }
            }
            spans = merged;
        }
        for (s, e) in spans {
            out.push(self.index[&pretoken[s..e]]);
        }
    }

    /// Concatenates the byte contents of every id.
    pub fn decode(&self, tokens: &TokenString) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in &tokens.ids {
            out.extend_from_slice(self.token_bytes(id)?);
        }
        Ok(out)
    }
}

/// Binary IP vectors recovered from a tokeniser on a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpVectors {
    pub free: Vec<bool>,
    pub priced: Vec<bool>,
    pub colours: Vec<bool>,
}

impl IpVectors {
    /// Weighted path length of the encoded segmentation, summed over blocks.
    pub fn objective(&self, graph: &TokenisationGraph) -> u64 {
        let mut total = 0u64;
        for (t, block) in graph.blocks().iter().enumerate() {
            let f0 = graph.free_offset(t);
            let p0 = graph.priced_offset(t);
            let used = self.free[f0..f0 + block.len()]
                .iter()
                .filter(|&&b| b)
                .count()
                + self.priced[p0..p0 + block.priced.len()]
                    .iter()
                    .filter(|&&b| b)
                    .count();
            total += block.weight * used as u64;
        }
        total
    }
}

/// Maps a tokeniser back into IP vectors on `graph`: the colour indicator of
/// its learned tokens plus the edge indicators of each pretoken's encoding.
pub fn to_ip_vectors(tok: &Tokeniser, graph: &TokenisationGraph) -> Result<IpVectors> {
    let mut colour_of: HashMap<&[u8], usize> = HashMap::with_capacity(graph.colours().len());
    for (i, c) in graph.colours().iter().enumerate() {
        colour_of.insert(c.as_slice(), i);
    }
    let mut colours = vec![false; graph.colours().len()];
    for token in tok.learned() {
        let &idx = colour_of
            .get(token.as_slice())
            .ok_or_else(|| Error::UnknownToken {
                token: String::from_utf8_lossy(token).into_owned(),
                context: "learned token is not a colour of the graph".to_string(),
            })?;
        colours[idx] = true;
    }
    let mut free = vec![false; graph.num_free_edges()];
    let mut priced = vec![false; graph.num_priced_edges()];
    for (t, block) in graph.blocks().iter().enumerate() {
        let f0 = graph.free_offset(t);
        let p0 = graph.priced_offset(t);
        let ids = tok.encode_pretoken(&block.bytes);
        let mut pos = 0usize;
        for id in ids {
            let len = tok.token_bytes(id)?.len();
            if len == 1 {
                free[f0 + pos] = true;
            } else {
                let local = block.find_priced(pos, pos + len).ok_or_else(|| {
                    Error::UnknownToken {
                        token: String::from_utf8_lossy(&block.bytes[pos..pos + len]).into_owned(),
                        context: "edge not admitted by the graph policy".to_string(),
                    }
                })?;
                priced[p0 + local] = true;
            }
            pos += len;
        }
        debug_assert_eq!(pos, block.len(), "encoding must cover the pretoken");
    }
    Ok(IpVectors {
        free,
        priced,
        colours,
    })
}
