//! Per-token importance weights: uniform, corpus IDF, and external keyphrase
//! weights loaded from `weights.jsonl`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Corpus;
use crate::text::{check_tokens, Side, TokenSeq};

/// Sum below which a weight vector is replaced by uniform weights.
pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Uniform,
    Idf,
    ExternalKpw,
    ExternalKp,
}

impl Provenance {
    pub fn is_external(self) -> bool {
        matches!(self, Provenance::ExternalKpw | Provenance::ExternalKp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, provenance: Provenance) -> Self {
        Self {
            weights,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.weights.iter().map(|w| w * c).collect(), self.provenance)
    }
}

pub fn uniform_weights(seq: &TokenSeq) -> WeightVector {
    WeightVector::new(vec![1.0; seq.len()], Provenance::Uniform)
}

/// Replaces a vector whose sum is below `epsilon` with uniform weights.
///
/// The returned flag is `true` when the substitution happened.
pub fn floor_weights(w: WeightVector, epsilon: f64) -> (WeightVector, bool) {
    if w.sum() < epsilon {
        (
            WeightVector::new(vec![1.0; w.len()], Provenance::Uniform),
            true,
        )
    } else {
        (w, false)
    }
}

/// Document frequencies over a fitting corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdfTable {
    pub doc_count: u64,
    pub df: BTreeMap<String, u64>,
}

pub fn idf_fit<'a, I>(corpus: I) -> Result<IdfTable>
where
    I: IntoIterator<Item = &'a TokenSeq>,
{
    let mut doc_count = 0u64;
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for doc in corpus {
        doc_count += 1;
        let types: HashSet<&str> = doc.tokens().iter().map(String::as_str).collect();
        for t in types {
            *df.entry(t.to_owned()).or_default() += 1;
        }
    }
    if doc_count == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(IdfTable { doc_count, df })
}

impl IdfTable {
    /// `ln((N + 1) / (df + 1))`, with df = 0 for unseen tokens.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.df.get(token).copied().unwrap_or(0);
        ((self.doc_count as f64 + 1.0) / (df as f64 + 1.0)).ln()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: IdfTable =
            serde_json::from_str(&body).map_err(|e| Error::parse(path, e.line(), e))?;
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        if self.doc_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        if let Some((t, &n)) = self
            .df
            .iter()
            .find(|(_, &n)| n == 0 || n > self.doc_count)
        {
            return Err(Error::Invalid(format!(
                "idf table: df({t}) = {n} outside [1, {}]",
                self.doc_count
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("idf table serializes")
    }
}

pub fn idf_weights(table: &IdfTable, seq: &TokenSeq) -> WeightVector {
    WeightVector::new(
        seq.tokens().iter().map(|t| table.idf(t)).collect(),
        Provenance::Idf,
    )
}

/// One line of `weights.jsonl`.
///
/// `ref_index` selects among multiple reference answers and is omitted
/// when zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRecord {
    pub id: String,
    pub side: Side,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub ref_index: usize,
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

pub(crate) type RecordKey = (String, Side, usize);

/// Resolves a record key against the corpus, returning the token sequence it
/// must match.
pub(crate) fn resolve<'c>(
    corpus: &'c Corpus,
    id: &str,
    side: Side,
    ref_index: usize,
) -> Result<&'c TokenSeq> {
    let sample = corpus
        .get(id)
        .ok_or_else(|| Error::Invalid(format!("record for unknown sample id {id}")))?;
    if side == Side::Question {
        return Err(Error::Invalid(format!(
            "sample {id}: records must have side candidate or reference"
        )));
    }
    sample.seq(side, ref_index).ok_or_else(|| {
        Error::Invalid(format!(
            "sample {id}: ref_index {ref_index} out of range ({} references)",
            sample.references.len()
        ))
    })
}

/// Externally computed keyphrase weights, validated against a corpus.
#[derive(Debug, Clone)]
pub struct WeightStore {
    provenance: Provenance,
    entries: HashMap<RecordKey, WeightRecord>,
}

impl WeightStore {
    pub fn from_records(
        records: impl IntoIterator<Item = WeightRecord>,
        corpus: &Corpus,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut store = Self {
            provenance,
            entries: HashMap::new(),
        };
        for rec in records {
            store.insert(rec, corpus)?;
        }
        Ok(store)
    }

    fn insert(&mut self, rec: WeightRecord, corpus: &Corpus) -> Result<()> {
        let seq = resolve(corpus, &rec.id, rec.side, rec.ref_index)?;
        check_tokens(&rec.id, seq, &rec.tokens)?;
        if rec.weights.len() != rec.tokens.len() {
            return Err(Error::Alignment {
                id: rec.id,
                side: rec.side,
                expected: rec.tokens.len(),
                found: rec.weights.len(),
            });
        }
        let external = self.provenance.is_external();
        if let Some((position, &value)) = rec.weights.iter().enumerate().find(|(_, &w)| {
            !w.is_finite() || w < 0.0 || (external && w > 1.0)
        }) {
            return Err(Error::WeightRange {
                id: rec.id,
                side: rec.side,
                position,
                value,
            });
        }
        let key = (rec.id.clone(), rec.side, rec.ref_index);
        if self.entries.contains_key(&key) {
            return Err(Error::Invalid(format!(
                "duplicate weight record for sample {} ({})",
                rec.id, rec.side
            )));
        }
        self.entries.insert(key, rec);
        Ok(())
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str, side: Side, ref_index: usize) -> Option<WeightVector> {
        self.entries
            .get(&(id.to_owned(), side, ref_index))
            .map(|r| WeightVector::new(r.weights.clone(), self.provenance))
    }

    /// Records sorted by id, side, then reference index.
    pub fn records(&self) -> Vec<&WeightRecord> {
        let mut recs: Vec<_> = self.entries.values().collect();
        recs.sort_by(|a, b| (&a.id, a.side, a.ref_index).cmp(&(&b.id, b.side, b.ref_index)));
        recs
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in self.records() {
            out.push_str(&serde_json::to_string(rec).expect("weight record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn load_weight_store(
    path: impl AsRef<Path>,
    corpus: &Corpus,
    provenance: Provenance,
) -> Result<WeightStore> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut store = WeightStore {
        provenance,
        entries: HashMap::new(),
    };
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: WeightRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno + 1, e))?;
        store.insert(rec, corpus)?;
    }
    Ok(store)
}
