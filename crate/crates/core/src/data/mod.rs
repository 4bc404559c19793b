//! Tokenization, vocabularies, pretraining examples and labeled datasets.

mod masking;
mod synthetic;
mod tsv;

pub use masking::{mask_tokens, MaskOutcome, PretrainBatch, PretrainExample, PretrainSampler, MASK_PROB};
pub use synthetic::{synthetic_classification, synthetic_corpus, TOPICS};
pub use tsv::{read_tsv, write_tsv, FinetuneBatch, LabeledText};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const SEP: usize = 3;
pub const MASK: usize = 4;
pub const N_SPECIAL: usize = 5;
pub const SPECIAL_TOKENS: [&str; N_SPECIAL] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Lowercased whitespace tokens.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_lowercase).collect()
}

/// Bijective token ↔ id map; ids `0..5` are the special tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Tokens seen at least `min_freq` times, most frequent first (ties in
    /// lexicographic order), capped so the whole vocab has `max_size` entries.
    pub fn build<'a>(lines: impl IntoIterator<Item = &'a str>, min_freq: usize, max_size: usize) -> Result<Self> {
        if max_size <= N_SPECIAL {
            return Err(Error::Config(format!("vocab size {max_size} leaves no room beyond the special tokens")));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for line in lines {
            for t in tokenize(line) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut words: Vec<(String, usize)> = counts.into_iter().filter(|(w, c)| *c >= min_freq && !SPECIAL_TOKENS.contains(&w.as_str())).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        words.truncate(max_size - N_SPECIAL);
        Self::from_tokens(SPECIAL_TOKENS.iter().map(|s| s.to_string()).chain(words.into_iter().map(|(w, _)| w)).collect())
    }

    /// Rebuilds a vocab from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < N_SPECIAL || tokens[..N_SPECIAL].iter().zip(SPECIAL_TOKENS).any(|(a, b)| a != b) {
            return Err(Error::Config("vocab must start with the special tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocab entry `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, line: &str) -> Vec<usize> {
        tokenize(line).iter().map(|t| self.id(t)).collect()
    }
}
