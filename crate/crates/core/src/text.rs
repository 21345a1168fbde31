//! Tokenization and the token-sequence type every metric consumes.
//!
//! The tokenizer is deliberately simple: NFC normalization, lowercasing,
//! splitting on Unicode whitespace, and stripping punctuation (general
//! category `P*`) from both ends of each word. Words made only of
//! punctuation disappear. External weight and embedding files must carry
//! exactly these tokens.

use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Question,
    Reference,
    Candidate,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Question => "question",
            Side::Reference => "reference",
            Side::Candidate => "candidate",
        })
    }
}

pub fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Splits `text` into lowercase word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase().nfc().collect();
    normalized
        .split_whitespace()
        .map(|word| word.trim_matches(is_punctuation))
        .filter(|word| !word.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A tokenized text that keeps its original string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    raw_text: String,
    tokens: Vec<String>,
    side: Side,
}

impl TokenSeq {
    pub fn new(raw_text: impl Into<String>, side: Side) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text);
        Self {
            raw_text,
            tokens,
            side,
        }
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Attachment length disagrees with the token count of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentMismatch {
    pub id: String,
    pub side: Side,
    pub tokens: usize,
    pub attachment: usize,
}

impl From<AlignmentMismatch> for Error {
    fn from(m: AlignmentMismatch) -> Self {
        Error::Alignment {
            id: m.id,
            side: m.side,
            expected: m.tokens,
            found: m.attachment,
        }
    }
}

pub fn validate_alignment(
    id: &str,
    seq: &TokenSeq,
    attachment_len: usize,
) -> Result<(), AlignmentMismatch> {
    if seq.len() == attachment_len {
        Ok(())
    } else {
        Err(AlignmentMismatch {
            id: id.to_owned(),
            side: seq.side(),
            tokens: seq.len(),
            attachment: attachment_len,
        })
    }
}

/// Checks that an externally supplied token list equals our tokenization.
pub(crate) fn check_tokens(id: &str, seq: &TokenSeq, tokens: &[String]) -> Result<(), Error> {
    validate_alignment(id, seq, tokens.len())?;
    if let Some((position, (expected, found))) = seq
        .tokens()
        .iter()
        .zip(tokens)
        .enumerate()
        .find(|(_, (a, b))| a != b)
    {
        return Err(Error::TokenMismatch {
            id: id.to_owned(),
            side: seq.side(),
            position,
            expected: expected.clone(),
            found: found.clone(),
        });
    }
    Ok(())
}
