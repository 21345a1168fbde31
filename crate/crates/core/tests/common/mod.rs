//! Independent oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GENERATED: &str = "There are seven steps involved in a hypothesis test .";
pub const REFERENCE: &str = "Four steps are involved in a hypothesis test.";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// LCS length by enumerating every subset of candidate positions.
pub fn lcs_brute<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    assert!(a.len() <= 16);
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<&T> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if picked.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if picked.iter().all(|p| it.any(|x| x == *p)) {
            best = picked.len();
        }
    }
    best
}

/// Pearson r from raw sums: (nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²)).
pub fn pearson_direct(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Rank = (# strictly smaller) + (# equal + 1) / 2.
pub fn ranks_brute(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let eq = xs.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_direct(xs: &[f64], ys: &[f64]) -> f64 {
    pearson_direct(&ranks_brute(xs), &ranks_brute(ys))
}

/// Interval alpha from an explicitly built coincidence matrix.
///
/// Every ordered pair of values within a unit of m values adds 1/(m − 1)
/// to cell (c, k); units with fewer than two values are not pairable.
pub fn alpha_coincidence(rows: &[Vec<Option<f64>>]) -> f64 {
    let mut values: Vec<f64> = rows.iter().flatten().flatten().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let idx = |v: f64| values.iter().position(|x| *x == v).unwrap();
    let k = values.len();
    let mut o = vec![vec![0.0; k]; k];
    for r in rows {
        let u: Vec<f64> = r.iter().flatten().copied().collect();
        if u.len() < 2 {
            continue;
        }
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    o[idx(u[i])][idx(u[j])] += 1.0 / (u.len() as f64 - 1.0);
                }
            }
        }
    }
    let marg: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marg.iter().sum();
    let delta = |c: usize, k: usize| (values[c] - values[k]).powi(2);
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for kk in 0..k {
            d_o += o[c][kk] * delta(c, kk);
            d_e += marg[c] * marg[kk] * delta(c, kk);
        }
    }
    1.0 - (n - 1.0) * d_o / d_e
}

/// Deterministic pseudo-random unit vector for a token.
pub fn mock_vector(token: &str, dim: usize) -> Vec<f64> {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut r = rng(h);
    let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn json_str(s: &str) -> String {
    serde_json::to_string(s).unwrap()
}

fn json_floats(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(","))
}

/// A synthetic QA corpus in which correctness hinges on one key token.
///
/// Each reference holds one key word among filler words. The candidate keeps
/// a random share of the reference filler and either the right key or a
/// wrong one. Human ratings follow key correctness plus a little filler
/// overlap and noise; keyphrase weights favor key tokens.
pub struct SyntheticCorpus {
    pub samples: String,
    pub weights: String,
    pub embeddings: String,
    pub judgments: String,
}

pub const KEYS: usize = 50;
pub const FILLERS: usize = 50;
pub const EMBED_DIM: usize = 32;

pub fn synthetic_corpus(n: usize, seed: u64) -> SyntheticCorpus {
    let mut r = rng(seed);
    let keys: Vec<String> = (0..KEYS).map(|i| format!("key{i}")).collect();
    let fillers: Vec<String> = (0..FILLERS).map(|i| format!("w{i}")).collect();
    let qtypes = ["NUMERIC", "PERSON", "LOCATION", "ENTITY", "DESCRIPTION"];

    let mut out = SyntheticCorpus {
        samples: String::new(),
        weights: String::new(),
        embeddings: String::new(),
        judgments: String::new(),
    };
    for i in 0..n {
        let id = format!("s{i:05}");
        let ref_len = r.random_range(5..10);
        let mut reference: Vec<String> =
            (0..ref_len).map(|_| fillers[r.random_range(0..FILLERS)].clone()).collect();
        let key = r.random_range(0..KEYS);
        let key_pos = r.random_range(0..=reference.len());
        reference.insert(key_pos, keys[key].clone());

        let correct = r.random_bool(0.5);
        let keep: f64 = r.random_range(0.2..1.0);
        let mut kept_filler = 0usize;
        let mut candidate: Vec<String> = Vec::new();
        for (pos, tok) in reference.iter().enumerate() {
            if pos == key_pos {
                let k = if correct {
                    key
                } else {
                    (key + r.random_range(1..KEYS)) % KEYS
                };
                candidate.push(keys[k].clone());
            } else if r.random_bool(keep) {
                candidate.push(tok.clone());
                kept_filler += 1;
            } else {
                candidate.push(fillers[r.random_range(0..FILLERS)].clone());
            }
        }
        let overlap = kept_filler as f64 / (reference.len() - 1) as f64;

        let ref_text = format!("{}.", reference.join(" "));
        let cand_text = candidate.join(" ");
        writeln!(
            out.samples,
            "{{\"id\":{},\"question\":{},\"reference\":{},\"candidate\":{},\"question_type\":{},\"model\":{}}}",
            json_str(&id),
            json_str(&format!("What is item {i}?")),
            json_str(&ref_text),
            json_str(&cand_text),
            json_str(qtypes[i % qtypes.len()]),
            json_str(if i % 2 == 0 { "alpha" } else { "beta" }),
        )
        .unwrap();

        for (side, toks) in [("candidate", &candidate), ("reference", &reference)] {
            let w: Vec<f64> = toks
                .iter()
                .map(|t| {
                    if t.starts_with("key") {
                        r.random_range(0.85..0.99)
                    } else {
                        r.random_range(0.01..0.08)
                    }
                })
                .collect();
            let tok_json: Vec<String> = toks.iter().map(|t| json_str(t)).collect();
            writeln!(
                out.weights,
                "{{\"id\":{},\"side\":\"{side}\",\"tokens\":[{}],\"weights\":{}}}",
                json_str(&id),
                tok_json.join(","),
                json_floats(&w)
            )
            .unwrap();
            let vecs: Vec<String> = toks.iter().map(|t| json_floats(&mock_vector(t, EMBED_DIM))).collect();
            writeln!(
                out.embeddings,
                "{{\"id\":{},\"side\":\"{side}\",\"tokens\":[{}],\"dim\":{EMBED_DIM},\"vectors\":[{}]}}",
                json_str(&id),
                tok_json.join(","),
                vecs.join(",")
            )
            .unwrap();
        }

        let quality = 0.85 * if correct { 1.0 } else { 0.0 } + 0.15 * overlap;
        let ratings: Vec<String> = (0..10)
            .map(|_| {
                let v = 1.0 + 4.0 * quality + r.random_range(-1.2..1.2);
                (v.round().clamp(1.0, 5.0) as i64).to_string()
            })
            .collect();
        writeln!(out.judgments, "{{\"id\":{},\"ratings\":[{}]}}", json_str(&id), ratings.join(",")).unwrap();
    }
    out
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn write(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write_corpus(&self, c: &SyntheticCorpus) {
        self.write("samples.jsonl", &c.samples);
        self.write("weights.jsonl", &c.weights);
        self.write("embeddings.jsonl", &c.embeddings);
        self.write("judgments.jsonl", &c.judgments);
    }
}

pub fn shuffled<T: Clone>(xs: &[T], seed: u64) -> Vec<T> {
    let mut v = xs.to_vec();
    v.shuffle(&mut rng(seed));
    v
}

pub fn exists(p: &Path) -> bool {
    p.exists()
}
