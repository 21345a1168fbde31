//! Score-table serialization. Floats are written with six decimals.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::OutputFormat;
use super::scoring::ScoreRow;
use crate::error::{Error, Result};

pub(crate) fn fmt_float(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn json_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "null".into())
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

pub const SCORE_HEADER: [&str; 7] = ["id", "metric", "score", "raw_score", "precision", "recall", "flags"];

pub fn write_scores<W: Write>(rows: &[ScoreRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(SCORE_HEADER).map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.id.clone(),
                    r.metric.clone(),
                    fmt_float(r.score),
                    fmt_float(r.raw_score),
                    fmt_opt(r.precision),
                    fmt_opt(r.recall),
                    r.flags.join(";"),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in rows {
                let flags: Vec<String> = r.flags.iter().map(|f| json_str(f)).collect();
                writeln!(
                    out,
                    "{{\"id\":{},\"metric\":{},\"score\":{},\"raw_score\":{},\"precision\":{},\"recall\":{},\"flags\":[{}]}}",
                    json_str(&r.id),
                    json_str(&r.metric),
                    fmt_float(r.score),
                    fmt_float(r.raw_score),
                    json_opt(r.precision),
                    json_opt(r.recall),
                    flags.join(",")
                )
                .map_err(|e| Error::io("<output>", e))?;
            }
        }
    }
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// metric label → sample id → score, metrics in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    order: Vec<String>,
    scores: HashMap<String, HashMap<String, f64>>,
}

impl ScoreTable {
    pub fn insert(&mut self, metric: &str, id: &str, score: f64) -> Result<()> {
        if !self.scores.contains_key(metric) {
            self.order.push(metric.to_owned());
        }
        let col = self.scores.entry(metric.to_owned()).or_default();
        if col.insert(id.to_owned(), score).is_some() {
            return Err(Error::Invalid(format!("duplicate score for {id} / {metric}")));
        }
        Ok(())
    }

    pub fn from_rows(rows: &[ScoreRow]) -> Result<Self> {
        let mut t = Self::default();
        for r in rows {
            t.insert(&r.metric, &r.id, r.score)?;
        }
        // rows arrive sorted per sample; present metrics in label order
        t.order.sort();
        Ok(t)
    }

    pub fn metrics(&self) -> &[String] {
        &self.order
    }

    pub fn get(&self, metric: &str, id: &str) -> Option<f64> {
        self.scores.get(metric)?.get(id).copied()
    }

    /// Reads a table written by `score`, in either format.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut t = Self::default();
        if body.trim_start().starts_with('{') {
            for (lineno, line) in body.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let v: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| Error::parse(path, lineno + 1, e))?;
                let field = |k: &str| v.get(k).ok_or_else(|| Error::parse(path, lineno + 1, format!("missing {k}")));
                let id = field("id")?.as_str().ok_or_else(|| Error::parse(path, lineno + 1, "id is not a string"))?;
                let metric = field("metric")?
                    .as_str()
                    .ok_or_else(|| Error::parse(path, lineno + 1, "metric is not a string"))?;
                let score = field("score")?
                    .as_f64()
                    .ok_or_else(|| Error::parse(path, lineno + 1, "score is not a number"))?;
                t.insert(metric, id, score)?;
            }
        } else {
            let mut rdr = csv::Reader::from_reader(body.as_bytes());
            let headers = rdr.headers().map_err(csv_err)?.clone();
            let col = |name: &str| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::parse(path, 1, format!("missing column {name}")))
            };
            let (ci, cm, cs) = (col("id")?, col("metric")?, col("score")?);
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| Error::parse(path, i + 2, e))?;
                let score: f64 = rec[cs]
                    .parse()
                    .map_err(|e| Error::parse(path, i + 2, format!("score: {e}")))?;
                t.insert(&rec[cm], &rec[ci], score)?;
            }
        }
        Ok(t)
    }
}

/// One line of a correlation report.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub group: String,
    pub metric: String,
    pub pearson: f64,
    pub p_value: f64,
    pub spearman: f64,
    pub n: usize,
}

pub fn write_correlations<W: Write>(rows: &[CorrelationRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["group", "metric", "pearson", "p_value", "spearman", "n"])
                .map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.group.clone(),
                    r.metric.clone(),
                    fmt_float(r.pearson),
                    fmt_float(r.p_value),
                    fmt_float(r.spearman),
                    r.n.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in rows {
                writeln!(
                    out,
                    "{{\"group\":{},\"metric\":{},\"pearson\":{},\"p_value\":{},\"spearman\":{},\"n\":{}}}",
                    json_str(&r.group),
                    json_str(&r.metric),
                    fmt_float(r.pearson),
                    fmt_float(r.p_value),
                    fmt_float(r.spearman),
                    r.n
                )
                .map_err(|e| Error::io("<output>", e))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankPairRow {
    pub metric: String,
    pub match_pct: f64,
    pub matches: usize,
    pub eligible: usize,
}

pub fn write_rank_pairs<W: Write>(rows: &[RankPairRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["metric", "match_pct", "matches", "eligible"])
                .map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.metric.clone(),
                    fmt_float(r.match_pct),
                    r.matches.to_string(),
                    r.eligible.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in rows {
                writeln!(
                    out,
                    "{{\"metric\":{},\"match_pct\":{},\"matches\":{},\"eligible\":{}}}",
                    json_str(&r.metric),
                    fmt_float(r.match_pct),
                    r.matches,
                    r.eligible
                )
                .map_err(|e| Error::io("<output>", e))?;
            }
        }
    }
    Ok(())
}

/// Sorted `BTreeMap` view, used to list ids deterministically in errors.
pub(crate) fn sorted_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let set: BTreeMap<&str, ()> = ids.into_iter().map(|i| (i, ())).collect();
    set.into_keys().collect()
}
