//! Entity-resolution front end: unordered record pairs scored by normalized
//! edit-distance similarity.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priority::{self, HeuristicPartition, Stratum, Thresholds};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: u64,
    pub fields: Vec<String>,
}

/// Records sorted by id. Ids are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordTable {
    rows: Vec<Record>,
}

impl RecordTable {
    pub fn new(mut rows: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for r in &rows {
            if !seen.insert(r.id) {
                return Err(Error::malformed(None, format!("duplicate record_id {}", r.id)));
            }
        }
        rows.sort_by_key(|r| r.id);
        Ok(RecordTable { rows })
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// How fields are turned into the string that gets compared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalization {
    pub separator: String,
    pub lowercase: bool,
    pub collapse_whitespace: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            separator: " ".to_string(),
            lowercase: true,
            collapse_whitespace: true,
        }
    }
}

impl Normalization {
    pub fn apply(&self, fields: &[String]) -> String {
        let joined = fields.join(&self.separator);
        let cased = if self.lowercase {
            joined.to_lowercase()
        } else {
            joined
        };
        if self.collapse_whitespace {
            cased.split_whitespace().collect::<Vec<_>>().join(" ")
        } else {
            cased
        }
    }
}

/// Number of unordered, self-excluded pairs over `n` records.
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

pub fn all_pairs(t: &RecordTable) -> u64 {
    pair_count(t.len())
}

/// Row-index pairs `(i, j)` with `i < j`, in lexicographic order, generated
/// on the fly.
#[derive(Debug, Clone)]
pub struct PairIter {
    n: usize,
    i: usize,
    j: usize,
}

impl PairIter {
    pub fn new(n: usize) -> Self {
        PairIter { n, i: 0, j: 1 }
    }
}

impl Iterator for PairIter {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.j >= self.n {
            self.i += 1;
            self.j = self.i + 1;
            if self.j >= self.n {
                return None;
            }
        }
        let out = (self.i, self.j);
        self.j += 1;
        Some(out)
    }
}

/// `1 − lev(a, b) / max(|a|, |b|)` over characters; two empty strings are identical.
pub fn string_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

pub fn similarity(a: &Record, b: &Record, norm: &Normalization) -> f64 {
    string_similarity(&norm.apply(&a.fields), &norm.apply(&b.fields))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub left_id: u64,
    pub right_id: u64,
    pub similarity: f64,
    pub stratum: Stratum,
}

/// Scores every pair and hands them to `sink` in canonical order, a block of
/// `rows_per_chunk` left rows at a time. Blocks are scored in parallel; at most
/// one block of pairs is held in memory.
pub fn stream_scored_pairs<F>(
    t: &RecordTable,
    thresholds: Thresholds,
    norm: &Normalization,
    rows_per_chunk: usize,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&[CandidatePair]) -> Result<()>,
{
    let keys: Vec<String> = t.rows().iter().map(|r| norm.apply(&r.fields)).collect();
    let n = keys.len();
    let step = rows_per_chunk.max(1);
    for start in (0..n).step_by(step) {
        let end = (start + step).min(n);
        let block: Vec<CandidatePair> = (start..end)
            .into_par_iter()
            .flat_map_iter(|i| {
                let keys = &keys;
                (i + 1..n).map(move |j| {
                    let s = string_similarity(&keys[i], &keys[j]);
                    CandidatePair {
                        left_id: t.rows()[i].id,
                        right_id: t.rows()[j].id,
                        similarity: s,
                        stratum: thresholds.classify(s),
                    }
                })
            })
            .collect();
        if !block.is_empty() {
            sink(&block)?;
        }
    }
    Ok(())
}

/// Every scored pair plus the partition of the pair universe it induces.
/// Item `k` of the partition is `pairs[k]`.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub pairs: Vec<CandidatePair>,
    pub partition: HeuristicPartition,
}

impl Candidates {
    pub fn ambiguous(&self) -> impl Iterator<Item = &CandidatePair> {
        self.partition.ambiguous.iter().map(|&k| &self.pairs[k])
    }
}

pub fn candidates(t: &RecordTable, alpha: f64, beta: f64, norm: &Normalization) -> Result<Candidates> {
    let thresholds = Thresholds::new(alpha, beta)?;
    let mut pairs = Vec::with_capacity(all_pairs(t) as usize);
    stream_scored_pairs(t, thresholds, norm, 64, |block| {
        pairs.extend_from_slice(block);
        Ok(())
    })?;
    let scores = pairs.iter().map(|p| p.similarity).collect();
    let partition = priority::partition(scores, alpha, beta)?;
    Ok(Candidates { pairs, partition })
}
