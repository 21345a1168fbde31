//! Greedy-matching embedding similarity (BERTScore) with per-token weights.
//!
//! Embeddings come from `embeddings.jsonl`; nothing here runs an encoder.
//! Vectors are L2-normalized on load so inner products are cosines.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Corpus;
use crate::score::ScoreTriple;
use crate::text::{check_tokens, Side};
use crate::weights::{resolve, RecordKey, WeightVector};

/// Row-major matrix of unit-norm token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f64>,
    dim: usize,
}

impl EmbeddingMatrix {
    /// Normalizes every row; a zero-norm row is reported by its index.
    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> std::result::Result<Self, RowError> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(RowError::Dimension {
                    row: i,
                    expected: dim,
                    found: row.len(),
                });
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(RowError::ZeroNorm { row: i });
            }
            data.extend(row.iter().map(|x| x / norm));
        }
        Ok(Self { data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RowError {
    #[error("row {row} has {found} components, expected {expected}")]
    Dimension {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row} has zero norm")]
    ZeroNorm {
        row: usize,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
    } else {
        0.0
    }
}

/// Weighted greedy-match precision, recall and F1.
///
/// Each candidate token is matched to its most similar reference token for
/// precision and vice versa for recall. Values are raw cosines and may be
/// negative; use [`ScoreTriple::clamped`] for a `[0, 1]` report.
pub fn weighted_bertscore(
    cand_emb: &EmbeddingMatrix,
    ref_emb: &EmbeddingMatrix,
    cand_weights: &WeightVector,
    ref_weights: &WeightVector,
) -> Result<ScoreTriple> {
    if cand_weights.len() != cand_emb.rows() {
        return Err(Error::Alignment {
            id: "<in-memory>".into(),
            side: Side::Candidate,
            expected: cand_emb.rows(),
            found: cand_weights.len(),
        });
    }
    if ref_weights.len() != ref_emb.rows() {
        return Err(Error::Alignment {
            id: "<in-memory>".into(),
            side: Side::Reference,
            expected: ref_emb.rows(),
            found: ref_weights.len(),
        });
    }
    let (m, n) = (cand_emb.rows(), ref_emb.rows());
    if m == 0 || n == 0 {
        return Ok(ScoreTriple::degenerate());
    }
    if cand_emb.dim() != ref_emb.dim() {
        return Err(Error::Invalid(format!(
            "embedding dimensions differ: {} vs {}",
            cand_emb.dim(),
            ref_emb.dim()
        )));
    }

    let mut best_for_cand = vec![f64::NEG_INFINITY; m];
    let mut best_for_ref = vec![f64::NEG_INFINITY; n];
    for (i, best_c) in best_for_cand.iter_mut().enumerate() {
        let c = cand_emb.row(i);
        for (j, best_r) in best_for_ref.iter_mut().enumerate() {
            let s = dot(c, ref_emb.row(j));
            *best_c = best_c.max(s);
            *best_r = best_r.max(s);
        }
    }
    let precision = weighted_mean(&best_for_cand, &cand_weights.weights);
    let recall = weighted_mean(&best_for_ref, &ref_weights.weights);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ScoreTriple::new(precision, recall, f))
}

/// One line of `embeddings.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub side: Side,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub ref_index: usize,
    pub tokens: Vec<String>,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

/// Token embeddings keyed by sample, side, and reference index.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    entries: HashMap<RecordKey, EmbeddingMatrix>,
}

impl EmbeddingStore {
    pub fn from_records(
        records: impl IntoIterator<Item = EmbeddingRecord>,
        corpus: &Corpus,
    ) -> Result<Self> {
        let mut store = Self::default();
        for rec in records {
            store.insert(rec, corpus)?;
        }
        Ok(store)
    }

    fn insert(&mut self, rec: EmbeddingRecord, corpus: &Corpus) -> Result<()> {
        let seq = resolve(corpus, &rec.id, rec.side, rec.ref_index)?;
        check_tokens(&rec.id, seq, &rec.tokens)?;
        if rec.vectors.len() != rec.tokens.len() {
            return Err(Error::Alignment {
                id: rec.id,
                side: rec.side,
                expected: rec.tokens.len(),
                found: rec.vectors.len(),
            });
        }
        match self.dim {
            Some(d) if d != rec.dim => {
                return Err(Error::Invalid(format!(
                    "sample {} ({}): dim {} differs from earlier records ({d})",
                    rec.id, rec.side, rec.dim
                )))
            }
            _ => self.dim = Some(rec.dim),
        }
        let matrix = EmbeddingMatrix::from_rows(&rec.vectors, rec.dim).map_err(|e| match e {
            RowError::Dimension { row, expected, found } => Error::Invalid(format!(
                "sample {} ({}): vector {row} has {found} components, expected {expected}",
                rec.id, rec.side
            )),
            RowError::ZeroNorm { row } => Error::Invalid(format!(
                "zero-norm vector at ({}, {}, {row})",
                rec.id, rec.side
            )),
        })?;
        let key = (rec.id.clone(), rec.side, rec.ref_index);
        if self.entries.insert(key, matrix).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate embedding record for sample {} ({})",
                rec.id, rec.side
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str, side: Side, ref_index: usize) -> Option<&EmbeddingMatrix> {
        self.entries.get(&(id.to_owned(), side, ref_index))
    }
}

pub fn load_embedding_store(path: impl AsRef<Path>, corpus: &Corpus) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut store = EmbeddingStore::default();
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno + 1, e))?;
        store.insert(rec, corpus)?;
    }
    Ok(store)
}
