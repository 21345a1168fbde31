//! Human-judgment processing and metric-quality statistics.
//!
//! Ratings are 5-point Likert integers. Per-sample ratings are cleaned with
//! z-score filtering, averaged, and mapped to `[0, 1]`; metric scores are
//! then compared against those human scores with Pearson and Spearman
//! correlation, per-group breakdowns, and pairwise rank agreement.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::sample::QASample;

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    /// z-scores computed once over all raw ratings.
    #[default]
    Batch,
    /// z-scores recomputed after every removal.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub z_max: f64,
    pub max_remove: usize,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            z_max: 1.0,
            max_remove: 5,
            mode: FilterMode::Batch,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `|z|` for every value, using the population standard deviation.
/// `None` when the values have no spread.
fn abs_z_scores(values: &[f64]) -> Option<Vec<f64>> {
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len() as f64;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return None;
    }
    Some(values.iter().map(|v| ((v - mu) / sigma).abs()).collect())
}

/// Removes outlying ratings: those with `|z| > z_max`, largest first, at most
/// `max_remove` of them. Kept ratings retain their input order.
pub fn filter_ratings(raw: &[u8], config: &FilterConfig) -> Result<Vec<u8>> {
    if raw.is_empty() {
        return Err(Error::Invalid("filter_ratings: no ratings".into()));
    }
    let mut keep = vec![true; raw.len()];
    match config.mode {
        FilterMode::Batch => {
            let values: Vec<f64> = raw.iter().map(|&r| r as f64).collect();
            let Some(z) = abs_z_scores(&values) else {
                return Ok(raw.to_vec());
            };
            let mut outliers: Vec<usize> = (0..raw.len()).filter(|&i| z[i] > config.z_max).collect();
            // equal |z| means equal |deviation|, so position settles ties
            outliers.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
            for &i in outliers.iter().take(config.max_remove) {
                keep[i] = false;
            }
        }
        FilterMode::Iterative => {
            for _ in 0..config.max_remove {
                let live: Vec<usize> = (0..raw.len()).filter(|&i| keep[i]).collect();
                let values: Vec<f64> = live.iter().map(|&i| raw[i] as f64).collect();
                let Some(z) = abs_z_scores(&values) else { break };
                let worst = (0..live.len())
                    .filter(|&k| z[k] > config.z_max)
                    .max_by(|&a, &b| z[a].total_cmp(&z[b]).then(b.cmp(&a)));
                match worst {
                    Some(k) => keep[live[k]] = false,
                    None => break,
                }
            }
        }
    }
    Ok(raw
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&r, _)| r)
        .collect())
}

/// Mean rating mapped from `[1, 5]` onto `[0, 1]`.
pub fn aggregate_human(kept: &[u8]) -> Result<f64> {
    Ok((mean_rating(kept)? - 1.0) / 4.0)
}

pub fn mean_rating(kept: &[u8]) -> Result<f64> {
    if kept.is_empty() {
        return Err(Error::Invalid("aggregate_human: no ratings".into()));
    }
    Ok(kept.iter().map(|&r| r as f64).sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentRecord {
    pub sample_id: String,
    pub raw_ratings: Vec<u8>,
    pub kept_ratings: Vec<u8>,
    pub human_score: f64,
}

impl JudgmentRecord {
    pub fn from_raw(sample_id: impl Into<String>, raw: Vec<u8>, config: &FilterConfig) -> Result<Self> {
        let sample_id = sample_id.into();
        if let Some(bad) = raw.iter().find(|r| !(MIN_RATING..=MAX_RATING).contains(*r)) {
            return Err(Error::Invalid(format!(
                "sample {sample_id}: rating {bad} outside 1..=5"
            )));
        }
        let kept_ratings = filter_ratings(&raw, config)
            .map_err(|_| Error::Invalid(format!("sample {sample_id}: no ratings")))?;
        let human_score = aggregate_human(&kept_ratings)?;
        Ok(Self {
            sample_id,
            raw_ratings: raw,
            kept_ratings,
            human_score,
        })
    }

    /// Mean of the kept ratings on the original 1–5 scale.
    pub fn mean_rating(&self) -> f64 {
        self.human_score * 4.0 + 1.0
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentLine {
    id: String,
    ratings: Vec<i64>,
}

/// Reads `judgments.jsonl` into `(id, ratings)` pairs, in file order.
pub fn load_judgments(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<u8>)>> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in body.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JudgmentLine =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, e))?;
        if rec.ratings.is_empty() {
            return Err(Error::parse(path, lineno, format!("sample {}: no ratings", rec.id)));
        }
        let mut ratings = Vec::with_capacity(rec.ratings.len());
        for r in rec.ratings {
            if !(MIN_RATING as i64..=MAX_RATING as i64).contains(&r) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("sample {}: rating {r} outside 1..=5", rec.id),
                ));
            }
            ratings.push(r as u8);
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::parse(path, lineno, format!("duplicate judgment id {}", rec.id)));
        }
        out.push((rec.id, ratings));
    }
    Ok(out)
}

/// Items × annotators grid; `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMatrix {
    cells: Vec<Vec<Option<f64>>>,
}

impl ReliabilityMatrix {
    pub fn new(cells: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let lo = MIN_RATING as f64;
        let hi = MAX_RATING as f64;
        for (i, row) in cells.iter().enumerate() {
            if let Some(v) = row.iter().flatten().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::Invalid(format!(
                    "reliability matrix: item {i} has rating {v} outside [1, 5]"
                )));
            }
        }
        Ok(Self { cells })
    }

    /// One row per item from variable-length rating lists; short rows are
    /// padded with missing cells.
    pub fn from_units<R: AsRef<[u8]>>(units: &[R]) -> Result<Self> {
        let width = units.iter().map(|u| u.as_ref().len()).max().unwrap_or(0);
        Self::new(
            units
                .iter()
                .map(|u| {
                    let mut row: Vec<Option<f64>> =
                        u.as_ref().iter().map(|&r| Some(r as f64)).collect();
                    row.resize(width, None);
                    row
                })
                .collect(),
        )
    }

    pub fn items(&self) -> &[Vec<Option<f64>>] {
        &self.cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaLevel {
    #[default]
    Interval,
    Ordinal,
}

/// Krippendorff's alpha via the coincidence matrix. Items with fewer than
/// two ratings are not pairable and are ignored.
pub fn krippendorff_alpha(m: &ReliabilityMatrix, level: AlphaLevel) -> Result<f64> {
    let units: Vec<Vec<f64>> = m
        .items()
        .iter()
        .map(|row| row.iter().flatten().copied().collect::<Vec<_>>())
        .filter(|u| u.len() >= 2)
        .collect();
    if units.len() < 2 {
        return Err(Error::Invalid(
            "krippendorff_alpha: fewer than 2 items with at least 2 ratings".into(),
        ));
    }

    let mut values: Vec<f64> = units.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let k = values.len();
    let index = |v: f64| values.binary_search_by(|x| x.total_cmp(&v)).expect("value present");

    let mut coincidence = vec![0.0; k * k];
    for u in &units {
        let mut counts = vec![0.0; k];
        for &v in u {
            counts[index(v)] += 1.0;
        }
        let scale = 1.0 / (u.len() as f64 - 1.0);
        for c in 0..k {
            if counts[c] == 0.0 {
                continue;
            }
            for d in 0..k {
                let pairs = counts[c] * (counts[d] - if c == d { 1.0 } else { 0.0 });
                coincidence[c * k + d] += pairs * scale;
            }
        }
    }
    let marginals: Vec<f64> = (0..k)
        .map(|c| coincidence[c * k..(c + 1) * k].iter().sum())
        .collect();
    let n: f64 = marginals.iter().sum();

    let delta = |c: usize, d: usize| -> f64 {
        match level {
            AlphaLevel::Interval => (values[c] - values[d]).powi(2),
            AlphaLevel::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let span: f64 = marginals[lo..=hi].iter().sum();
                (span - (marginals[lo] + marginals[hi]) / 2.0).powi(2)
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c == d {
                continue;
            }
            let dist = delta(c, d);
            observed += coincidence[c * k + d] * dist;
            expected += marginals[c] * marginals[d] * dist;
        }
    }
    if observed == 0.0 {
        return Ok(1.0);
    }
    expected /= n - 1.0;
    Ok(1.0 - observed / expected)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value of the t-test against zero correlation.
    pub p_value: f64,
    pub n: usize,
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Invalid(format!(
            "correlation: lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite value".into()));
    }
    Ok(())
}

fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    check_pair(xs, ys)?;
    let r = pearson_r(xs, ys)?;
    Ok(Correlation {
        r,
        p_value: t_test_p(r, xs.len()),
        n: xs.len(),
    })
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    check_pair(xs, ys)?;
    let r = pearson_r(&average_ranks(xs), &average_ranks(ys))?;
    Ok(Correlation {
        r,
        p_value: t_test_p(r, xs.len()),
        n: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPairResult {
    pub percentage: f64,
    pub matches: usize,
    pub eligible: usize,
}

/// Share of clearly separated answer pairs that a metric orders like humans.
///
/// Human scores are mean ratings on the 1–5 scale; a pair is eligible when
/// they differ by more than `gap_threshold`. A metric tie never matches.
pub fn rank_pair_match(
    human_a: &[f64],
    human_b: &[f64],
    metric_a: &[f64],
    metric_b: &[f64],
    gap_threshold: f64,
) -> Result<RankPairResult> {
    let n = human_a.len();
    if human_b.len() != n || metric_a.len() != n || metric_b.len() != n {
        return Err(Error::Invalid("rank_pair_match: lists are not index-aligned".into()));
    }
    let mut eligible = 0;
    let mut matches = 0;
    for i in 0..n {
        let human_diff = human_a[i] - human_b[i];
        if human_diff.abs() <= gap_threshold {
            continue;
        }
        eligible += 1;
        let metric_diff = metric_a[i] - metric_b[i];
        if metric_diff != 0.0 && metric_diff.signum() == human_diff.signum() {
            matches += 1;
        }
    }
    if eligible == 0 {
        return Err(Error::EmptyComparison);
    }
    Ok(RankPairResult {
        percentage: 100.0 * matches as f64 / eligible as f64,
        matches,
        eligible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    QuestionType,
    ModelTag,
}

impl GroupKey {
    pub fn name(&self) -> &'static str {
        match self {
            GroupKey::QuestionType => "question_type",
            GroupKey::ModelTag => "model",
        }
    }

    pub fn of<'s>(&self, sample: &'s QASample) -> Option<&'s str> {
        match self {
            GroupKey::QuestionType => sample.question_type.as_deref(),
            GroupKey::ModelTag => sample.model_tag.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCorrelation {
    pub group: String,
    pub n: usize,
    pub pearson: Correlation,
    pub spearman: Correlation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedGroup {
    pub group: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Breakdown {
    pub groups: Vec<GroupCorrelation>,
    pub skipped: Vec<SkippedGroup>,
}

/// Correlations within each group of samples sharing a key value, groups in
/// lexicographic order. Groups under three samples or with a constant score
/// column are reported in `skipped`.
pub fn breakdown(
    samples: &[&QASample],
    human_scores: &[f64],
    metric_scores: &[f64],
    key: GroupKey,
) -> Result<Breakdown> {
    if samples.len() != human_scores.len() || samples.len() != metric_scores.len() {
        return Err(Error::Invalid("breakdown: lists are not index-aligned".into()));
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let g = key.of(s).ok_or_else(|| {
            Error::Invalid(format!("sample {} has no {} for grouping", s.id, key.name()))
        })?;
        let entry = groups.entry(g).or_default();
        entry.0.push(human_scores[i]);
        entry.1.push(metric_scores[i]);
    }
    let mut out = Breakdown::default();
    for (g, (h, m)) in groups {
        let result = pearson(&m, &h).and_then(|p| Ok((p, spearman(&m, &h)?)));
        match result {
            Ok((pearson, spearman)) => out.groups.push(GroupCorrelation {
                group: g.to_owned(),
                n: h.len(),
                pearson,
                spearman,
            }),
            Err(e) => out.skipped.push(SkippedGroup {
                group: g.to_owned(),
                n: h.len(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}
