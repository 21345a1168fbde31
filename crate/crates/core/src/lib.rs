//! Keyphrase-weighted evaluation metrics for generative question answering.
//!
//! Answer tokens are weighted by how much they matter for answering the
//! question (keyphrase weights, produced offline by a token classifier and
//! loaded from `weights.jsonl`). The weights are folded into BLEU-1,
//! ROUGE-L and BERTScore, and the [`meta_eval`] module measures how well any
//! metric tracks human correctness judgments.

pub mod cli;
pub mod embed;
pub mod error;
pub mod meta_eval;
pub mod ngram;
pub mod sample;
pub mod score;
pub mod text;
pub mod weights;

pub use error::{Error, Result};
pub use sample::{Corpus, QASample};
pub use score::ScoreTriple;
pub use text::{tokenize, validate_alignment, Side, TokenSeq};
pub use weights::{Provenance, WeightVector};
