//! Batch entry points: `score`, `meta-eval`, `rank-pair` and `idf-build`.
//!
//! Each `cmd_*` function returns its result in memory; [`run`] dispatches on
//! the configured command and writes the result to `--out` or stdout.

mod config;
mod scoring;
mod table;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};

pub use config::{
    parse_metric_list, Command, Metric, MetricSpec, OutputFormat, ResolvedMetric, RunConfig,
    WeightSource,
};
pub use scoring::{ScoreRow, Scorer};
pub use table::{
    write_correlations, write_rank_pairs, write_scores, CorrelationRow, RankPairRow, ScoreTable,
};

use crate::error::{Error, Result};
use crate::meta_eval::{
    breakdown, krippendorff_alpha, load_judgments, pearson, rank_pair_match, spearman,
    JudgmentRecord, ReliabilityMatrix,
};
use crate::sample::{Corpus, QASample};
use crate::weights::{idf_fit, IdfTable};

fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let path = config
        .samples
        .as_ref()
        .ok_or_else(|| Error::Invalid("--samples is required".into()))?;
    let corpus = Corpus::load(path)?;
    if corpus.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok(corpus)
}

pub fn cmd_score(config: &RunConfig) -> Result<Vec<ScoreRow>> {
    let corpus = load_corpus(config)?;
    Scorer::from_config(config, &corpus)?.score_corpus(config.jobs)
}

/// Scores from `--scores` when given, otherwise computed from the inputs.
fn score_table(config: &RunConfig, corpus: &Corpus) -> Result<ScoreTable> {
    match &config.scores {
        Some(p) => ScoreTable::load(p),
        None => ScoreTable::from_rows(&Scorer::from_config(config, corpus)?.score_corpus(config.jobs)?),
    }
}

/// Metric columns to report, honoring `--metrics` when scores were loaded.
fn report_metrics(config: &RunConfig, table: &ScoreTable) -> Result<Vec<String>> {
    if config.metrics.is_empty() {
        return Ok(table.metrics().to_vec());
    }
    let wanted = config.requested_labels();
    if let Some(m) = wanted.iter().find(|m| !table.metrics().contains(m)) {
        return Err(Error::Invalid(format!("score table has no column {m}")));
    }
    Ok(wanted)
}

fn judgments_by_id(config: &RunConfig) -> Result<HashMap<String, JudgmentRecord>> {
    let path = config
        .judgments
        .as_ref()
        .ok_or_else(|| Error::Invalid("--judgments is required".into()))?;
    load_judgments(path)?
        .into_iter()
        .map(|(id, raw)| Ok((id.clone(), JudgmentRecord::from_raw(id, raw, &config.filter)?)))
        .collect()
}

fn require_ids<T>(
    what: &str,
    samples: &[&QASample],
    has: impl Fn(&str) -> Option<T>,
) -> Result<()> {
    let missing: Vec<&str> = samples
        .iter()
        .map(|s| s.id.as_str())
        .filter(|id| has(id).is_none())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "{what} missing for {} sample id(s): {}",
            missing.len(),
            table::sorted_ids(missing).join(", ")
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaEvalReport {
    pub rows: Vec<CorrelationRow>,
    /// `(group, metric, reason)` for correlations that could not be computed.
    pub skipped: Vec<(String, String, String)>,
    /// Agreement of the kept ratings, when at least two items are pairable.
    pub alpha: Option<f64>,
    pub mean_kept_annotators: f64,
}

pub fn cmd_meta_eval(config: &RunConfig) -> Result<MetaEvalReport> {
    let corpus = load_corpus(config)?;
    let judgments = judgments_by_id(config)?;
    let mut samples: Vec<&QASample> = corpus.iter().collect();
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    require_ids("judgments", &samples, |id| judgments.get(id))?;

    let table = score_table(config, &corpus)?;
    let metrics = report_metrics(config, &table)?;
    for m in &metrics {
        require_ids(&format!("scores for {m}"), &samples, |id| table.get(m, id))?;
    }

    let records: Vec<&JudgmentRecord> = samples.iter().map(|s| &judgments[&s.id]).collect();
    let human: Vec<f64> = records.iter().map(|j| j.human_score).collect();
    let units: Vec<&[u8]> = records.iter().map(|j| j.kept_ratings.as_slice()).collect();
    let alpha = ReliabilityMatrix::from_units(&units)
        .and_then(|m| krippendorff_alpha(&m, config.alpha_level))
        .ok();
    let mean_kept_annotators =
        units.iter().map(|u| u.len() as f64).sum::<f64>() / units.len() as f64;

    let mut report = MetaEvalReport {
        rows: Vec::new(),
        skipped: Vec::new(),
        alpha,
        mean_kept_annotators,
    };

    for metric in &metrics {
        let scores: Vec<f64> = samples
            .iter()
            .map(|s| table.get(metric, &s.id).expect("checked above"))
            .collect();
        match pearson(&scores, &human).and_then(|p| Ok((p, spearman(&scores, &human)?))) {
            Ok((p, s)) => report.rows.push(CorrelationRow {
                group: "all".into(),
                metric: metric.clone(),
                pearson: p.r,
                p_value: p.p_value,
                spearman: s.r,
                n: samples.len(),
            }),
            Err(e) => {
                log::warn!("no correlation for {metric}: {e}");
                report.skipped.push(("all".into(), metric.clone(), e.to_string()));
            }
        }
        if let Some(key) = config.group_by {
            let b = breakdown(&samples, &human, &scores, key)?;
            report.rows.extend(b.groups.into_iter().map(|g| CorrelationRow {
                group: g.group,
                metric: metric.clone(),
                pearson: g.pearson.r,
                p_value: g.pearson.p_value,
                spearman: g.spearman.r,
                n: g.n,
            }));
            for g in b.skipped {
                log::warn!("skipping group {} for {metric} (n = {}): {}", g.group, g.n, g.reason);
                report.skipped.push((g.group, metric.clone(), g.reason));
            }
        }
    }
    Ok(report)
}

/// Pairs the two models' answers to each question and measures how often
/// each metric orders them as humans do.
pub fn cmd_rank_pair(config: &RunConfig) -> Result<Vec<RankPairRow>> {
    let corpus = load_corpus(config)?;
    let judgments = judgments_by_id(config)?;

    let mut by_model: BTreeMap<&str, Vec<&QASample>> = BTreeMap::new();
    for s in corpus.iter() {
        let tag = s
            .model_tag
            .as_deref()
            .ok_or_else(|| Error::Invalid(format!("sample {} has no model tag", s.id)))?;
        by_model.entry(tag).or_default().push(s);
    }
    if by_model.len() != 2 {
        return Err(Error::Invalid(format!(
            "rank-pair needs exactly 2 model tags, found {}",
            by_model.len()
        )));
    }
    let (model_a, model_b): (&str, &str) = {
        let mut keys = by_model.keys();
        (keys.next().unwrap(), keys.next().unwrap())
    };

    let index = |model: &str| -> Result<HashMap<&str, &QASample>> {
        let mut map = HashMap::new();
        for s in &by_model[model] {
            if map.insert(s.question.raw_text().trim(), *s).is_some() {
                return Err(Error::Invalid(format!(
                    "model {model} answers question {:?} more than once",
                    s.question.raw_text()
                )));
            }
        }
        Ok(map)
    };
    let a_by_q = index(model_a)?;
    let b_by_q = index(model_b)?;
    let mut pairs: Vec<(&QASample, &QASample)> = a_by_q
        .iter()
        .filter_map(|(q, a)| b_by_q.get(q).map(|b| (*a, *b)))
        .collect();
    pairs.sort_by(|x, y| x.0.id.cmp(&y.0.id));
    if pairs.is_empty() {
        return Err(Error::EmptyComparison);
    }

    let paired: Vec<&QASample> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    require_ids("judgments", &paired, |id| judgments.get(id))?;
    let table = score_table(config, &corpus)?;
    let metrics = report_metrics(config, &table)?;

    let human_a: Vec<f64> = pairs.iter().map(|(a, _)| judgments[&a.id].mean_rating()).collect();
    let human_b: Vec<f64> = pairs.iter().map(|(_, b)| judgments[&b.id].mean_rating()).collect();
    let mut rows = Vec::new();
    for metric in &metrics {
        require_ids(&format!("scores for {metric}"), &paired, |id| table.get(metric, id))?;
        let ma: Vec<f64> = pairs.iter().map(|(a, _)| table.get(metric, &a.id).unwrap()).collect();
        let mb: Vec<f64> = pairs.iter().map(|(_, b)| table.get(metric, &b.id).unwrap()).collect();
        let r = rank_pair_match(&human_a, &human_b, &ma, &mb, config.gap)?;
        rows.push(RankPairRow {
            metric: metric.clone(),
            match_pct: r.percentage,
            matches: r.matches,
            eligible: r.eligible,
        });
    }
    Ok(rows)
}

/// Document frequencies over every reference answer of the corpus.
pub fn cmd_idf_build(config: &RunConfig) -> Result<IdfTable> {
    let path = config
        .samples
        .as_ref()
        .ok_or_else(|| Error::Invalid("--samples is required".into()))?;
    let corpus = Corpus::load(path)?;
    idf_fit(corpus.iter().flat_map(|s| s.references.iter()))
}

fn with_output(config: &RunConfig, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &config.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Runs the configured command and writes its output.
pub fn run(config: &RunConfig) -> Result<()> {
    match config.command {
        Command::Score => {
            let rows = cmd_score(config)?;
            with_output(config, |w| write_scores(&rows, config.format, w))
        }
        Command::MetaEval => {
            let report = cmd_meta_eval(config)?;
            match report.alpha {
                Some(a) => log::info!(
                    "krippendorff alpha {a:.3}, {:.2} annotators per sample after filtering",
                    report.mean_kept_annotators
                ),
                None => log::warn!("krippendorff alpha undefined for these judgments"),
            }
            with_output(config, |w| write_correlations(&report.rows, config.format, w))
        }
        Command::RankPair => {
            let rows = cmd_rank_pair(config)?;
            with_output(config, |w| write_rank_pairs(&rows, config.format, w))
        }
        Command::IdfBuild => {
            let table = cmd_idf_build(config)?;
            with_output(config, |w| {
                writeln!(w, "{}", table.to_json()).map_err(|e| Error::io("<output>", e))
            })
        }
    }
}
