use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::meta_eval::{AlphaLevel, FilterConfig, GroupKey};
use crate::ngram::{Bleu1Mode, RougeMode, DEFAULT_BETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Bleu(usize),
    RougeL,
    BertScore,
    Bleu1Kpqa,
    RougeLKpqa,
    BertScoreKpqa,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Bleu(1),
        Metric::Bleu(2),
        Metric::Bleu(3),
        Metric::Bleu(4),
        Metric::RougeL,
        Metric::BertScore,
        Metric::Bleu1Kpqa,
        Metric::RougeLKpqa,
        Metric::BertScoreKpqa,
    ];

    pub fn name(&self) -> String {
        match self {
            Metric::Bleu(n) => format!("bleu-{n}"),
            Metric::RougeL => "rouge-l".into(),
            Metric::BertScore => "bertscore".into(),
            Metric::Bleu1Kpqa => "bleu-1-kpqa".into(),
            Metric::RougeLKpqa => "rouge-l-kpqa".into(),
            Metric::BertScoreKpqa => "bertscore-kpqa".into(),
        }
    }

    /// Weight source used when none is requested; `None` for unweighted metrics.
    pub fn natural_source(&self) -> Option<WeightSource> {
        match self {
            Metric::Bleu(_) | Metric::RougeL => None,
            Metric::BertScore => Some(WeightSource::Idf),
            Metric::Bleu1Kpqa | Metric::RougeLKpqa | Metric::BertScoreKpqa => {
                Some(WeightSource::KpwFile)
            }
        }
    }

    pub fn is_kpqa(&self) -> bool {
        matches!(self, Metric::Bleu1Kpqa | Metric::RougeLKpqa | Metric::BertScoreKpqa)
    }

    pub fn needs_embeddings(&self) -> bool {
        matches!(self, Metric::BertScore | Metric::BertScoreKpqa)
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WeightSource {
    Uniform,
    Idf,
    KpwFile,
    KpFile,
}

impl WeightSource {
    pub fn name(&self) -> &'static str {
        match self {
            WeightSource::Uniform => "uniform",
            WeightSource::Idf => "idf",
            WeightSource::KpwFile => "kpw-file",
            WeightSource::KpFile => "kp-file",
        }
    }
}

impl FromStr for WeightSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "idf" => Ok(Self::Idf),
            "kpw-file" => Ok(Self::KpwFile),
            "kp-file" => Ok(Self::KpFile),
            _ => Err(Error::Invalid(format!("unknown weight source {s:?}"))),
        }
    }
}

/// A requested metric, optionally pinned to a weight source with
/// `name@source` (e.g. `rouge-l-kpqa@kp-file`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub metric: Metric,
    pub source: Option<WeightSource>,
}

impl MetricSpec {
    pub fn new(metric: Metric) -> Self {
        Self {
            metric,
            source: None,
        }
    }

    pub fn with_source(metric: Metric, source: WeightSource) -> Self {
        Self {
            metric,
            source: Some(source),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = match s.split_once('@') {
            Some((m, src)) => MetricSpec::with_source(m.parse()?, src.parse()?),
            None => MetricSpec::new(s.parse()?),
        };
        if spec.source.is_some() && spec.metric.natural_source().is_none() {
            return Err(Error::Invalid(format!(
                "metric {} takes no weights",
                spec.metric.name()
            )));
        }
        Ok(spec)
    }
}

pub fn parse_metric_list(s: &str) -> Result<Vec<MetricSpec>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// A metric with its weight source resolved, plus the column label it is
/// reported under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedMetric {
    pub metric: Metric,
    pub source: Option<WeightSource>,
    pub label: String,
}

impl fmt::Display for ResolvedMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Command {
    #[default]
    Score,
    MetaEval,
    RankPair,
    IdfBuild,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            _ => Err(Error::Invalid(format!("unknown output format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub samples: Option<PathBuf>,
    /// Keyphrase weights computed with the question (`kpw-file`).
    pub weights: Option<PathBuf>,
    /// Keyphrase weights computed without the question (`kp-file`).
    pub kp_weights: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub judgments: Option<PathBuf>,
    /// Precomputed score table for `meta-eval` and `rank-pair`.
    pub scores: Option<PathBuf>,
    pub idf: Option<PathBuf>,
    /// Empty means "every metric the supplied inputs allow".
    pub metrics: Vec<MetricSpec>,
    /// Source for keyphrase metrics that do not pin one.
    pub weight_source: Option<WeightSource>,
    pub beta: f64,
    pub bleu1_mode: Bleu1Mode,
    pub rouge_mode: RougeMode,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker threads for scoring; 0 picks the machine default.
    pub jobs: usize,
    pub filter: FilterConfig,
    pub alpha_level: AlphaLevel,
    pub group_by: Option<GroupKey>,
    pub gap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Score,
            samples: None,
            weights: None,
            kp_weights: None,
            embeddings: None,
            judgments: None,
            scores: None,
            idf: None,
            metrics: Vec::new(),
            weight_source: None,
            beta: DEFAULT_BETA,
            bleu1_mode: Bleu1Mode::default(),
            rouge_mode: RougeMode::default(),
            out: None,
            format: OutputFormat::Csv,
            jobs: 0,
            filter: FilterConfig::default(),
            alpha_level: AlphaLevel::Interval,
            group_by: None,
            gap: 2.0,
        }
    }
}

impl RunConfig {
    fn source_available(&self, source: WeightSource) -> bool {
        match source {
            WeightSource::Uniform | WeightSource::Idf => true,
            WeightSource::KpwFile => self.weights.is_some(),
            WeightSource::KpFile => self.kp_weights.is_some(),
        }
    }

    fn resolve(&self, spec: MetricSpec) -> ResolvedMetric {
        let natural = spec.metric.natural_source();
        let source = spec.source.or_else(|| {
            if spec.metric.is_kpqa() {
                self.weight_source.or(natural)
            } else {
                natural
            }
        });
        let label = match source {
            Some(s) if Some(s) != natural => format!("{}@{}", spec.metric.name(), s.name()),
            _ => spec.metric.name(),
        };
        ResolvedMetric {
            metric: spec.metric,
            source,
            label,
        }
    }

    /// Labels of the explicitly requested metrics, without checking inputs.
    pub fn requested_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for spec in &self.metrics {
            let label = self.resolve(*spec).label;
            if !out.contains(&label) {
                out.push(label);
            }
        }
        out
    }

    /// Requested metrics with sources resolved, after checking that each
    /// one's inputs were supplied. Duplicate labels are dropped.
    pub fn resolved_metrics(&self) -> Result<Vec<ResolvedMetric>> {
        let specs: Vec<MetricSpec> = if self.metrics.is_empty() {
            Metric::ALL
                .into_iter()
                .map(MetricSpec::new)
                .filter(|s| {
                    let r = self.resolve(*s);
                    (!r.metric.needs_embeddings() || self.embeddings.is_some())
                        && r.source.is_none_or(|src| self.source_available(src))
                })
                .collect()
        } else {
            self.metrics.clone()
        };

        let mut out: Vec<ResolvedMetric> = Vec::new();
        for spec in specs {
            let r = self.resolve(spec);
            if r.metric.needs_embeddings() && self.embeddings.is_none() {
                return Err(Error::Invalid(format!("metric {} requires --embeddings", r.label)));
            }
            if let Some(src) = r.source {
                if !self.source_available(src) {
                    let flag = match src {
                        WeightSource::KpFile => "--kp-weights",
                        _ => "--weights",
                    };
                    return Err(Error::Invalid(format!("metric {} requires {flag}", r.label)));
                }
            }
            if !out.iter().any(|o| o.label == r.label) {
                out.push(r);
            }
        }
        if out.is_empty() {
            return Err(Error::Invalid("no metrics requested".into()));
        }
        Ok(out)
    }
}
