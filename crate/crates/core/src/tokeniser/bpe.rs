//! Merge-based baseline trainer.
//!
//! Starting from byte-level token strings (one per distinct pretoken,
//! weighted by its count), each step merges the adjacent pair with the
//! highest weighted frequency into a new token, replacing occurrences left to
//! right, until the budget is exhausted or no adjacent pairs remain. Ties are
//! broken by the lexicographically smallest merged byte string, then by the
//! smallest (left, right) pair, so retraining is reproducible everywhere.

use std::collections::HashMap;

use crate::corpus::{Pretokenizer, PretokenTable};
use crate::error::Result;
use crate::tokeniser::{Method, Provenance, SpecialToken, Tokeniser};

/// Trains a BPE tokeniser with `budget` merges over the pretoken table.
pub fn train_bpe(
    table: &PretokenTable,
    budget: usize,
    specials: Vec<SpecialToken>,
    pretokenizer: Pretokenizer,
) -> Result<Tokeniser> {
    let mut pieces: Vec<Vec<u8>> = (0u16..256).map(|b| vec![b as u8]).collect();
    let mut piece_id: HashMap<Vec<u8>, u32> = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i as u32))
        .collect();
    let mut words: Vec<(Vec<u32>, u64)> = table
        .entries()
        .iter()
        .map(|(bytes, count)| (bytes.iter().map(|&b| u32::from(b)).collect(), *count))
        .collect();

    let mut merges: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    let mut learned: Vec<Vec<u8>> = Vec::new();

    for _ in 0..budget {
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (seq, weight) in &words {
            for pair in seq.windows(2) {
                *counts.entry((pair[0], pair[1])).or_insert(0) += weight;
            }
        }
        if counts.is_empty() {
            break;
        }
        // Map iteration order is arbitrary; the comparison below is a total
        // order, so the selected pair is not.
        let mut best: Option<((u32, u32), u64, Vec<u8>)> = None;
        for (&(a, b), &count) in &counts {
            let replace = match &best {
                None => true,
                Some((pair, best_count, best_merged)) => {
                    if count != *best_count {
                        count > *best_count
                    } else {
                        let merged = concat(&pieces[a as usize], &pieces[b as usize]);
                        match merged.cmp(best_merged) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Greater => false,
                            std::cmp::Ordering::Equal => {
                                (&pieces[a as usize], &pieces[b as usize])
                                    < (&pieces[pair.0 as usize], &pieces[pair.1 as usize])
                            }
                        }
                    }
                }
            };
            if replace {
                let merged = concat(&pieces[a as usize], &pieces[b as usize]);
                best = Some(((a, b), count, merged));
            }
        }
        let ((left, right), _, merged_bytes) = best.expect("counts is non-empty");

        let new_id = match piece_id.get(&merged_bytes) {
            Some(&id) => id,
            None => {
                let id = pieces.len() as u32;
                piece_id.insert(merged_bytes.clone(), id);
                pieces.push(merged_bytes.clone());
                learned.push(merged_bytes.clone());
                id
            }
        };
        merges.push((
            pieces[left as usize].clone(),
            pieces[right as usize].clone(),
        ));

        for (seq, _) in &mut words {
            if seq.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(seq[i]);
                    i += 1;
                }
            }
            *seq = out;
        }
    }

    Tokeniser::assemble(
        specials,
        learned,
        Method::Bpe { merges },
        budget,
        pretokenizer,
        Provenance::bare(table.content_hash()),
    )
}

fn concat(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}
