//! QA samples and `samples.jsonl` ingestion.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::text::{Side, TokenSeq};

#[derive(Debug, Clone, PartialEq)]
pub struct QASample {
    pub id: String,
    pub question: TokenSeq,
    pub references: Vec<TokenSeq>,
    pub candidate: TokenSeq,
    pub question_type: Option<String>,
    pub model_tag: Option<String>,
}

impl QASample {
    pub fn new(
        id: impl Into<String>,
        question: &str,
        references: &[&str],
        candidate: &str,
    ) -> Result<Self> {
        let id = id.into();
        if references.is_empty() {
            return Err(Error::Invalid(format!("sample {id}: no reference answer")));
        }
        Ok(Self {
            id,
            question: TokenSeq::new(question, Side::Question),
            references: references
                .iter()
                .map(|r| TokenSeq::new(*r, Side::Reference))
                .collect(),
            candidate: TokenSeq::new(candidate, Side::Candidate),
            question_type: None,
            model_tag: None,
        })
    }

    pub fn with_question_type(mut self, qtype: impl Into<String>) -> Self {
        self.question_type = Some(qtype.into());
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model_tag = Some(model.into());
        self
    }

    /// Sequence for a side; `index` selects among references.
    pub fn seq(&self, side: Side, index: usize) -> Option<&TokenSeq> {
        match side {
            Side::Candidate if index == 0 => Some(&self.candidate),
            Side::Question if index == 0 => Some(&self.question),
            Side::Reference => self.references.get(index),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    id: String,
    question: String,
    reference: OneOrMany,
    candidate: String,
    #[serde(default)]
    question_type: Option<String>,
    #[serde(default)]
    model: Option<String>,
}

/// An ordered set of samples with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    samples: Vec<QASample>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(samples: Vec<QASample>) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.references.is_empty() {
                return Err(Error::Invalid(format!("sample {}: no reference answer", s.id)));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate sample id {}", s.id)));
            }
        }
        Ok(Self { samples, index })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &body)
    }

    pub(crate) fn parse(path: &Path, body: &str) -> Result<Self> {
        let mut samples = Vec::new();
        let mut index = HashMap::new();
        for (lineno, line) in body.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SampleLine =
                serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, e))?;
            let refs = match rec.reference {
                OneOrMany::One(r) => vec![r],
                OneOrMany::Many(rs) => rs,
            };
            if refs.is_empty() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("sample {}: empty reference list", rec.id),
                ));
            }
            if index.insert(rec.id.clone(), samples.len()).is_some() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("duplicate sample id {}", rec.id),
                ));
            }
            samples.push(QASample {
                question: TokenSeq::new(rec.question, Side::Question),
                references: refs
                    .into_iter()
                    .map(|r| TokenSeq::new(r, Side::Reference))
                    .collect(),
                candidate: TokenSeq::new(rec.candidate, Side::Candidate),
                question_type: rec.question_type,
                model_tag: rec.model,
                id: rec.id,
            });
        }
        Ok(Self { samples, index })
    }

    pub fn get(&self, id: &str) -> Option<&QASample> {
        self.index.get(id).map(|&i| &self.samples[i])
    }

    pub fn samples(&self) -> &[QASample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QASample> {
        self.samples.iter()
    }
}
