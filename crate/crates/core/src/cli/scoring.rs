//! Per-sample scoring across a corpus.

use rayon::prelude::*;

use super::config::{Metric, ResolvedMetric, RunConfig, WeightSource};
use crate::embed::{load_embedding_store, weighted_bertscore, EmbeddingStore};
use crate::error::{Error, Result};
use crate::ngram::{
    bleu, bleu1_kpqa_multi, rouge_l_kpqa_multi, rouge_l_multi, Bleu1Mode, RougeMode,
};
use crate::sample::{Corpus, QASample};
use crate::score::ScoreTriple;
use crate::text::Side;
use crate::weights::{
    floor_weights, idf_fit, idf_weights, load_weight_store, uniform_weights, IdfTable, Provenance,
    WeightStore, WeightVector, DEFAULT_FLOOR,
};

/// One metric value for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub metric: String,
    /// Reported value (F-measure for triples, clamped to `[0, 1]` for
    /// embedding metrics).
    pub score: f64,
    /// Value before clamping.
    pub raw_score: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub flags: Vec<&'static str>,
}

/// Everything needed to score samples, loaded once and shared read-only
/// across workers.
pub struct Scorer<'c> {
    corpus: &'c Corpus,
    metrics: Vec<ResolvedMetric>,
    idf: Option<IdfTable>,
    kpw: Option<WeightStore>,
    kp: Option<WeightStore>,
    embeddings: Option<EmbeddingStore>,
    beta: f64,
    bleu1_mode: Bleu1Mode,
    rouge_mode: RougeMode,
}

impl<'c> Scorer<'c> {
    /// Loads the weight, embedding and IDF inputs the configured metrics need.
    pub fn from_config(config: &RunConfig, corpus: &'c Corpus) -> Result<Self> {
        let metrics = config.resolved_metrics()?;
        let uses = |src: WeightSource| metrics.iter().any(|m| m.source == Some(src));

        let kpw = match (&config.weights, uses(WeightSource::KpwFile)) {
            (Some(p), true) => Some(load_weight_store(p, corpus, Provenance::ExternalKpw)?),
            _ => None,
        };
        let kp = match (&config.kp_weights, uses(WeightSource::KpFile)) {
            (Some(p), true) => Some(load_weight_store(p, corpus, Provenance::ExternalKp)?),
            _ => None,
        };
        let embeddings = match &config.embeddings {
            Some(p) if metrics.iter().any(|m| m.metric.needs_embeddings()) => {
                Some(load_embedding_store(p, corpus)?)
            }
            _ => None,
        };
        let idf = if uses(WeightSource::Idf) {
            Some(match &config.idf {
                Some(p) => IdfTable::load(p)?,
                None => idf_fit(corpus.iter().flat_map(|s| s.references.iter()))?,
            })
        } else {
            None
        };
        Ok(Self {
            corpus,
            metrics,
            idf,
            kpw,
            kp,
            embeddings,
            beta: config.beta,
            bleu1_mode: config.bleu1_mode,
            rouge_mode: config.rouge_mode,
        })
    }

    pub fn metrics(&self) -> &[ResolvedMetric] {
        &self.metrics
    }

    /// Floored weights for one side plus whether the uniform fallback fired.
    fn weights(
        &self,
        sample: &QASample,
        side: Side,
        index: usize,
        source: WeightSource,
    ) -> Result<(WeightVector, bool)> {
        let seq = sample
            .seq(side, index)
            .ok_or_else(|| Error::Internal(format!("sample {}: no {side} #{index}", sample.id)))?;
        let store = |s: &Option<WeightStore>| -> Result<WeightVector> {
            let store = s
                .as_ref()
                .ok_or_else(|| Error::Internal("weight store not loaded".into()))?;
            store.get(&sample.id, side, index).ok_or_else(|| Error::MissingRecord {
                what: "weight",
                id: sample.id.clone(),
                side,
            })
        };
        let w = match source {
            WeightSource::Uniform => uniform_weights(seq),
            WeightSource::Idf => idf_weights(
                self.idf
                    .as_ref()
                    .ok_or_else(|| Error::Internal("idf table not loaded".into()))?,
                seq,
            ),
            WeightSource::KpwFile => store(&self.kpw)?,
            WeightSource::KpFile => store(&self.kp)?,
        };
        if w.len() != seq.len() {
            return Err(Error::Internal(format!(
                "sample {}: {} weights for {} tokens",
                sample.id,
                w.len(),
                seq.len()
            )));
        }
        Ok(floor_weights(w, DEFAULT_FLOOR))
    }

    fn score_metric(&self, sample: &QASample, m: &ResolvedMetric) -> Result<ScoreRow> {
        let mut flags = Vec::new();

        let cand_weights = |flags: &mut Vec<&'static str>| -> Result<WeightVector> {
            let src = m.source.expect("weighted metric has a source");
            let (w, fell_back) = self.weights(sample, Side::Candidate, 0, src)?;
            if fell_back {
                flags.push("candidate_uniform_fallback");
            }
            Ok(w)
        };
        let ref_weights = |flags: &mut Vec<&'static str>| -> Result<Vec<WeightVector>> {
            let src = m.source.expect("weighted metric has a source");
            let mut out = Vec::with_capacity(sample.references.len());
            let mut any = false;
            for i in 0..sample.references.len() {
                let (w, fell_back) = self.weights(sample, Side::Reference, i, src)?;
                any |= fell_back;
                out.push(w);
            }
            if any {
                flags.push("reference_uniform_fallback");
            }
            Ok(out)
        };

        let (score, raw, triple) = match m.metric {
            Metric::Bleu(n) => {
                let v = bleu(&sample.candidate, &sample.references, n)?;
                (v, v, None)
            }
            Metric::RougeL => {
                let t = rouge_l_multi(&sample.candidate, &sample.references, self.beta);
                if t.degenerate {
                    flags.push("degenerate");
                }
                (t.f, t.f, Some(t))
            }
            Metric::Bleu1Kpqa => {
                let cw = cand_weights(&mut flags)?;
                let v = bleu1_kpqa_multi(&sample.candidate, &sample.references, &cw, self.bleu1_mode)?;
                (v, v, None)
            }
            Metric::RougeLKpqa => {
                let cw = cand_weights(&mut flags)?;
                let rws = ref_weights(&mut flags)?;
                let paired: Vec<_> = sample.references.iter().cloned().zip(rws).collect();
                let t = rouge_l_kpqa_multi(&sample.candidate, &paired, &cw, self.beta, self.rouge_mode)?;
                if t.degenerate {
                    flags.push("degenerate");
                }
                (t.f, t.f, Some(t))
            }
            Metric::BertScore | Metric::BertScoreKpqa => {
                let store = self
                    .embeddings
                    .as_ref()
                    .ok_or_else(|| Error::Internal("embedding store not loaded".into()))?;
                let emb = |side: Side, i: usize| {
                    store.get(&sample.id, side, i).ok_or_else(|| Error::MissingRecord {
                        what: "embedding",
                        id: sample.id.clone(),
                        side,
                    })
                };
                let cw = cand_weights(&mut flags)?;
                let rws = ref_weights(&mut flags)?;
                let cand_emb = emb(Side::Candidate, 0)?;
                let mut best: Option<ScoreTriple> = None;
                for (i, rw) in rws.iter().enumerate() {
                    let t = weighted_bertscore(cand_emb, emb(Side::Reference, i)?, &cw, rw)?;
                    if best.is_none_or(|b| t.f > b.f) {
                        best = Some(t);
                    }
                }
                let raw = best.ok_or_else(|| Error::Internal("sample without references".into()))?;
                let shown = raw.clamped();
                if raw.degenerate {
                    flags.push("degenerate");
                }
                if shown != raw {
                    flags.push("clamped");
                }
                (shown.f, raw.f, Some(shown))
            }
        };
        Ok(ScoreRow {
            id: sample.id.clone(),
            metric: m.label.clone(),
            score,
            raw_score: raw,
            precision: triple.map(|t| t.precision),
            recall: triple.map(|t| t.recall),
            flags,
        })
    }

    pub fn score_sample(&self, sample: &QASample) -> Result<Vec<ScoreRow>> {
        self.metrics
            .iter()
            .map(|m| self.score_metric(sample, m))
            .collect()
    }

    /// Scores every sample on `jobs` workers (0 = machine default). Rows are
    /// ordered by sample id, then by metric label, whatever the worker count.
    pub fn score_corpus(&self, jobs: usize) -> Result<Vec<ScoreRow>> {
        let mut samples: Vec<&QASample> = self.corpus.iter().collect();
        samples.sort_by(|a, b| a.id.cmp(&b.id));

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
        let per_sample: Vec<Result<Vec<ScoreRow>>> =
            pool.install(|| samples.par_iter().map(|s| self.score_sample(s)).collect());

        let mut rows = Vec::with_capacity(samples.len() * self.metrics.len());
        for r in per_sample {
            let mut sample_rows = r?;
            sample_rows.sort_by(|a, b| a.metric.cmp(&b.metric));
            rows.extend(sample_rows);
        }
        Ok(rows)
    }
}
