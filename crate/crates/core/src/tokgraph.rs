//! The tokenisation graph: per-pretoken vertex layers, free byte-edges,
//! priced token-edges, and the colour partition over priced edges.
//!
//! Each distinct pretoken gets its own block with a unit source-to-sink flow
//! and an occurrence-count weight, which is equivalent to chaining duplicated
//! strings and merging identical subgraphs with adjusted objective
//! coefficients.

use std::collections::HashMap;
use std::io::Write;

use crate::corpus::PretokenTable;
use crate::error::{Error, Result};
use crate::hash::Fnv1a64;

/// Controls which token-edges are admitted when building the graph.
///
/// Free edges (the single-byte edges) are never pruned, so every pretoken
/// keeps a start-to-end path whatever the policy says.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePolicy {
    /// Maximum token length in bytes; `None` admits every substring.
    pub max_token_len: Option<usize>,
    /// Colours whose total weighted occurrence count falls below this are
    /// dropped together with their edges.
    pub min_colour_count: u64,
    pub name: String,
}

impl EdgePolicy {
    pub fn unbounded() -> Self {
        Self {
            max_token_len: None,
            min_colour_count: 0,
            name: "unbounded".to_string(),
        }
    }

    pub fn with_max_token_len(max_token_len: Option<usize>) -> Self {
        Self {
            max_token_len,
            min_colour_count: 0,
            name: "default".to_string(),
        }
    }
}

impl Default for EdgePolicy {
    fn default() -> Self {
        Self {
            max_token_len: Some(16),
            min_colour_count: 0,
            name: "default".to_string(),
        }
    }
}

/// A priced edge `(start, end)` inside one block, `end >= start + 2`,
/// carrying the colour of the substring it spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PricedEdge {
    pub start: usize,
    pub end: usize,
    pub colour: usize,
}

/// One pretoken's layer: `len + 1` vertices, `len` implicit free byte-edges
/// `(i, i+1)`, and the admitted priced edges sorted by `(start, end)`.
#[derive(Debug, Clone)]
pub struct Block {
    pub bytes: Vec<u8>,
    pub weight: u64,
    pub priced: Vec<PricedEdge>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Priced edges leaving `start`, as a contiguous slice.
    pub fn priced_from(&self, start: usize) -> &[PricedEdge] {
        let lo = self.priced.partition_point(|e| e.start < start);
        let hi = self.priced.partition_point(|e| e.start <= start);
        &self.priced[lo..hi]
    }

    /// Local index of the priced edge `(start, end)`, if admitted.
    pub fn find_priced(&self, start: usize, end: usize) -> Option<usize> {
        self.priced
            .binary_search_by(|e| (e.start, e.end).cmp(&(start, end)))
            .ok()
    }
}

#[derive(Debug, Clone)]
pub struct TokenisationGraph {
    blocks: Vec<Block>,
    colours: Vec<Vec<u8>>,
    colour_counts: Vec<u64>,
    policy: EdgePolicy,
    // Prefix offsets into the global vertex / free-edge / priced-edge spaces,
    // one entry per block plus a trailing total.
    vertex_offsets: Vec<usize>,
    free_offsets: Vec<usize>,
    priced_offsets: Vec<usize>,
}

impl TokenisationGraph {
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Colour index -> candidate token bytes, in first-appearance order
    /// (pretokens in table order, start positions left to right, lengths
    /// ascending).
    pub fn colours(&self) -> &[Vec<u8>] {
        &self.colours
    }

    pub fn colour_counts(&self) -> &[u64] {
        &self.colour_counts
    }

    pub fn policy(&self) -> &EdgePolicy {
        &self.policy
    }

    pub fn num_vertices(&self) -> usize {
        *self.vertex_offsets.last().unwrap()
    }

    pub fn num_free_edges(&self) -> usize {
        *self.free_offsets.last().unwrap()
    }

    pub fn num_priced_edges(&self) -> usize {
        *self.priced_offsets.last().unwrap()
    }

    pub fn vertex_offset(&self, block: usize) -> usize {
        self.vertex_offsets[block]
    }

    pub fn free_offset(&self, block: usize) -> usize {
        self.free_offsets[block]
    }

    pub fn priced_offset(&self, block: usize) -> usize {
        self.priced_offsets[block]
    }

    /// Colour index of a token, if it is a colour of this graph.
    pub fn colour_of(&self, token: &[u8]) -> Option<usize> {
        // Linear scan is fine for lookups on the public surface; hot paths
        // keep their own maps.
        self.colours.iter().position(|c| c == token)
    }

    /// Candidate tokens with their weighted occurrence counts, one entry per
    /// colour in colour order.
    pub fn candidate_tokens(&self) -> Vec<(Vec<u8>, u64)> {
        self.colours
            .iter()
            .cloned()
            .zip(self.colour_counts.iter().copied())
            .collect()
    }

    /// Deterministic fingerprint of the whole graph (policy, blocks, edges,
    /// colours), used for provenance and configuration checks.
    pub fn content_hash(&self) -> String {
        let mut h = Fnv1a64::new();
        h.update_field(self.policy.name.as_bytes());
        h.update_u64(self.policy.max_token_len.map_or(u64::MAX, |v| v as u64));
        h.update_u64(self.policy.min_colour_count);
        h.update_u64(self.blocks.len() as u64);
        for block in &self.blocks {
            h.update_field(&block.bytes);
            h.update_u64(block.weight);
            h.update_u64(block.priced.len() as u64);
            for e in &block.priced {
                h.update_u64(e.start as u64);
                h.update_u64(e.end as u64);
                h.update_u64(e.colour as u64);
            }
        }
        h.update_u64(self.colours.len() as u64);
        for c in &self.colours {
            h.update_field(c);
        }
        h.finish_hex()
    }

    /// Plain-text diagnostic dump: a colour table, then one record per
    /// pretoken listing its edges and colour ids.
    pub fn dump(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "colours {}", self.colours.len())?;
        for (i, c) in self.colours.iter().enumerate() {
            writeln!(
                w,
                "colour {i} {:?} count {}",
                String::from_utf8_lossy(c),
                self.colour_counts[i]
            )?;
        }
        for (t, block) in self.blocks.iter().enumerate() {
            writeln!(
                w,
                "pretoken {t} {:?} weight {} vertices {}",
                String::from_utf8_lossy(&block.bytes),
                block.weight,
                block.len() + 1
            )?;
            for i in 0..block.len() {
                writeln!(w, "  free {i} {}", i + 1)?;
            }
            for e in &block.priced {
                writeln!(w, "  priced {} {} colour {}", e.start, e.end, e.colour)?;
            }
        }
        Ok(())
    }
}

/// Builds the tokenisation graph for a pretoken table under a policy.
///
/// Colour ids are dense and assigned in a deterministic scan order so LP
/// column order is reproducible bit-for-bit.
pub fn build_graph(table: &PretokenTable, policy: &EdgePolicy) -> Result<TokenisationGraph> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let max_len = policy.max_token_len.unwrap_or(usize::MAX);

    // First pass: discover colours in scan order and tally weighted counts.
    let mut colour_ids: HashMap<&[u8], usize> = HashMap::new();
    let mut colours: Vec<Vec<u8>> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for (bytes, weight) in table.entries() {
        let n = bytes.len();
        for i in 0..n {
            let j_max = n.min(i.saturating_add(max_len));
            for j in (i + 2)..=j_max {
                let sub = &bytes[i..j];
                let id = *colour_ids.entry(sub).or_insert_with(|| {
                    colours.push(sub.to_vec());
                    counts.push(0);
                    colours.len() - 1
                });
                counts[id] += weight;
            }
        }
    }

    // Apply the colour-count threshold and reindex densely, preserving order.
    let keep: Vec<bool> = counts.iter().map(|&c| c >= policy.min_colour_count).collect();
    let mut remap: Vec<Option<usize>> = Vec::with_capacity(colours.len());
    let mut kept_colours = Vec::new();
    let mut kept_counts = Vec::new();
    for (id, keep_it) in keep.iter().enumerate() {
        if *keep_it {
            remap.push(Some(kept_colours.len()));
            kept_colours.push(std::mem::take(&mut colours[id]));
            kept_counts.push(counts[id]);
        } else {
            remap.push(None);
        }
    }

    // Second pass: materialise per-block priced edges for surviving colours.
    let mut blocks = Vec::with_capacity(table.len());
    let mut vertex_offsets = vec![0usize];
    let mut free_offsets = vec![0usize];
    let mut priced_offsets = vec![0usize];
    for (bytes, weight) in table.entries() {
        let n = bytes.len();
        let mut priced = Vec::new();
        for i in 0..n {
            let j_max = n.min(i.saturating_add(max_len));
            for j in (i + 2)..=j_max {
                let original = colour_ids[&bytes[i..j]];
                if let Some(colour) = remap[original] {
                    priced.push(PricedEdge {
                        start: i,
                        end: j,
                        colour,
                    });
                }
            }
        }
        vertex_offsets.push(vertex_offsets.last().unwrap() + n + 1);
        free_offsets.push(free_offsets.last().unwrap() + n);
        priced_offsets.push(priced_offsets.last().unwrap() + priced.len());
        blocks.push(Block {
            bytes: bytes.clone(),
            weight: *weight,
            priced,
        });
    }

    Ok(TokenisationGraph {
        blocks,
        colours: kept_colours,
        colour_counts: kept_counts,
        policy: policy.clone(),
        vertex_offsets,
        free_offsets,
        priced_offsets,
    })
}
