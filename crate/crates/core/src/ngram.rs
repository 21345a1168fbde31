//! N-gram overlap metrics: BLEU, ROUGE-L, and their keyphrase-weighted
//! counterparts BLEU-1-KPQA and ROUGE-L-KPQA.

use std::collections::HashMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::score::ScoreTriple;
use crate::text::{validate_alignment, TokenSeq};
use crate::weights::WeightVector;

/// Conventional ROUGE-L recall emphasis.
pub const DEFAULT_BETA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bleu1Mode {
    /// Every matching reference position counts, as the double sum is written.
    #[default]
    Literal,
    /// Each candidate token contributes its weight at most once.
    Clipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RougeMode {
    /// Recall numerator uses reference-side flags and weights.
    #[default]
    Symmetric,
    /// Recall numerator is the candidate-side weighted LCS.
    Literal,
}

impl FromStr for Bleu1Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "clipped" => Ok(Self::Clipped),
            _ => Err(Error::Invalid(format!("unknown bleu1 mode {s:?}"))),
        }
    }
}

impl FromStr for RougeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "literal" => Ok(Self::Literal),
            _ => Err(Error::Invalid(format!("unknown rouge mode {s:?}"))),
        }
    }
}

/// Membership flags of one longest common subsequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcsAlignment {
    pub candidate_flags: Vec<bool>,
    pub reference_flags: Vec<bool>,
    pub length: usize,
}

/// Longest common subsequence with per-position membership flags.
///
/// When several maximal alignments exist the backtrace moves up (skipping
/// the later candidate token) before moving left, so matched candidate
/// positions sit as early as possible.
pub fn lcs_align<T: PartialEq>(candidate: &[T], reference: &[T]) -> LcsAlignment {
    let (m, n) = (candidate.len(), reference.len());
    let width = n + 1;
    let mut dp = vec![0u32; (m + 1) * width];
    for i in 1..=m {
        for j in 1..=n {
            dp[i * width + j] = if candidate[i - 1] == reference[j - 1] {
                dp[(i - 1) * width + j - 1] + 1
            } else {
                dp[(i - 1) * width + j].max(dp[i * width + j - 1])
            };
        }
    }

    let mut candidate_flags = vec![false; m];
    let mut reference_flags = vec![false; n];
    let (mut i, mut j) = (m, n);
    while i > 0 && j > 0 {
        let here = dp[i * width + j];
        if dp[(i - 1) * width + j] == here {
            i -= 1;
        } else if dp[i * width + j - 1] == here {
            j -= 1;
        } else {
            debug_assert!(candidate[i - 1] == reference[j - 1]);
            candidate_flags[i - 1] = true;
            reference_flags[j - 1] = true;
            i -= 1;
            j -= 1;
        }
    }
    LcsAlignment {
        candidate_flags,
        reference_flags,
        length: dp[m * width + n] as usize,
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with clipped n-gram precision up to `max_n` and brevity
/// penalty against the closest reference length. Unsmoothed: any n-gram order
/// with zero matches gives 0.
pub fn bleu(candidate: &TokenSeq, references: &[TokenSeq], max_n: usize) -> Result<f64> {
    if max_n == 0 {
        return Err(Error::Invalid("bleu: max_n must be at least 1".into()));
    }
    if references.is_empty() {
        return Err(Error::Invalid("bleu: no references".into()));
    }
    let cand = candidate.tokens();
    let c = cand.len();
    if c == 0 {
        return Ok(0.0);
    }

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        if c < n {
            return Ok(0.0);
        }
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (gram, count) in ngram_counts(r.tokens(), n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        let matched: usize = ngram_counts(cand, n)
            .into_iter()
            .map(|(gram, count)| count.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        if matched == 0 {
            return Ok(0.0);
        }
        log_sum += (matched as f64 / (c - n + 1) as f64).ln();
    }

    // closest reference length, shorter wins ties
    let r = references
        .iter()
        .map(|s| s.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Ok(bp * (log_sum / max_n as f64).exp())
}

fn check_weights(seq: &TokenSeq, w: &WeightVector) -> Result<()> {
    validate_alignment("<in-memory>", seq, w.len())?;
    Ok(())
}

/// Keyphrase-weighted unigram precision of `candidate` against one reference.
pub fn bleu1_kpqa(
    candidate: &TokenSeq,
    reference: &TokenSeq,
    cand_weights: &WeightVector,
    mode: Bleu1Mode,
) -> Result<f64> {
    check_weights(candidate, cand_weights)?;
    let total = cand_weights.sum();
    if candidate.is_empty() || total <= 0.0 {
        return Ok(0.0);
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference.tokens() {
        *ref_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let matched: f64 = candidate
        .tokens()
        .iter()
        .zip(&cand_weights.weights)
        .map(|(t, &w)| {
            let hits = ref_counts.get(t.as_str()).copied().unwrap_or(0);
            let hits = match mode {
                Bleu1Mode::Literal => hits,
                Bleu1Mode::Clipped => hits.min(1),
            };
            w * hits as f64
        })
        .sum();
    Ok(matched / total)
}

/// Maximum of [`bleu1_kpqa`] over several references.
pub fn bleu1_kpqa_multi(
    candidate: &TokenSeq,
    references: &[TokenSeq],
    cand_weights: &WeightVector,
    mode: Bleu1Mode,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for r in references {
        best = best.max(bleu1_kpqa(candidate, r, cand_weights, mode)?);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Invalid("bleu1_kpqa: no references".into()))
    }
}

pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq, beta: f64) -> ScoreTriple {
    if candidate.is_empty() || reference.is_empty() {
        return ScoreTriple::degenerate();
    }
    let lcs = lcs_align(candidate.tokens(), reference.tokens()).length as f64;
    if lcs == 0.0 {
        return ScoreTriple::new(0.0, 0.0, 0.0);
    }
    ScoreTriple::from_pr(
        lcs / candidate.len() as f64,
        lcs / reference.len() as f64,
        beta,
    )
}

fn weighted_hits(flags: &[bool], weights: &[f64]) -> f64 {
    flags
        .iter()
        .zip(weights)
        .filter(|(&f, _)| f)
        .map(|(_, &w)| w)
        .sum()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// ROUGE-L with LCS membership weighted by keyphrase weights.
pub fn rouge_l_kpqa(
    candidate: &TokenSeq,
    reference: &TokenSeq,
    cand_weights: &WeightVector,
    ref_weights: &WeightVector,
    beta: f64,
    mode: RougeMode,
) -> Result<ScoreTriple> {
    check_weights(candidate, cand_weights)?;
    check_weights(reference, ref_weights)?;
    if candidate.is_empty() || reference.is_empty() {
        return Ok(ScoreTriple::degenerate());
    }
    let align = lcs_align(candidate.tokens(), reference.tokens());
    let cand_hits = weighted_hits(&align.candidate_flags, &cand_weights.weights);
    let recall_num = match mode {
        RougeMode::Symmetric => weighted_hits(&align.reference_flags, &ref_weights.weights),
        RougeMode::Literal => cand_hits,
    };
    let precision = ratio(cand_hits, cand_weights.sum());
    let recall = ratio(recall_num, ref_weights.sum());
    Ok(ScoreTriple::from_pr(precision, recall, beta))
}

/// Best-F [`rouge_l_kpqa`] over references, each with its own weights.
pub fn rouge_l_kpqa_multi(
    candidate: &TokenSeq,
    references: &[(TokenSeq, WeightVector)],
    cand_weights: &WeightVector,
    beta: f64,
    mode: RougeMode,
) -> Result<ScoreTriple> {
    let mut best: Option<ScoreTriple> = None;
    for (r, rw) in references {
        let s = rouge_l_kpqa(candidate, r, cand_weights, rw, beta, mode)?;
        if best.is_none_or(|b| s.f > b.f) {
            best = Some(s);
        }
    }
    best.ok_or_else(|| Error::Invalid("rouge_l_kpqa: no references".into()))
}

pub fn rouge_l_multi(candidate: &TokenSeq, references: &[TokenSeq], beta: f64) -> ScoreTriple {
    references
        .iter()
        .map(|r| rouge_l(candidate, r, beta))
        .reduce(|a, b| if b.f > a.f { b } else { a })
        .unwrap_or_else(ScoreTriple::degenerate)
}
