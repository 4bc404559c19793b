use log::debug;
use rand::Rng;

use super::{Vocab, CLS, MASK, N_SPECIAL, PAD, SEP};
use crate::error::{domain_err, Result};

/// Fraction of eligible tokens selected for prediction.
pub const MASK_PROB: f64 = 0.15;

/// What happened to a selected token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskOutcome {
    Mask,
    Keep,
    Random(usize),
}

/// One `[CLS] A [SEP] B [SEP]` sequence padded to the model length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretrainExample {
    pub token_ids: Vec<usize>,
    pub segment_ids: Vec<usize>,
    /// Original token at selected positions, `None` elsewhere.
    pub mlm_labels: Vec<Option<usize>>,
    /// 0: B follows A in the corpus, 1: B is a random sentence.
    pub nsp_label: usize,
}

impl PretrainExample {
    pub fn position_ids(&self) -> Vec<usize> {
        (0..self.token_ids.len()).collect()
    }

    /// Positions carrying an MLM label, with the labels.
    pub fn masked(&self) -> (Vec<usize>, Vec<usize>) {
        self.mlm_labels.iter().enumerate().filter_map(|(i, l)| l.map(|l| (i, l))).unzip()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PretrainBatch {
    pub examples: Vec<PretrainExample>,
}

impl PretrainBatch {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_masked(&self) -> usize {
        self.examples.iter().map(|e| e.mlm_labels.iter().flatten().count()).sum()
    }
}

/// Selects each non-special token with probability 0.15 and replaces it by
/// `[MASK]` (80%), itself (10%) or a random non-special token (10%).
pub fn mask_tokens<R: Rng + ?Sized>(ids: &mut [usize], vocab_size: usize, rng: &mut R) -> Vec<Option<MaskOutcome>> {
    ids.iter_mut()
        .map(|id| {
            if *id < N_SPECIAL || rng.random::<f64>() >= MASK_PROB {
                return None;
            }
            let u: f64 = rng.random();
            let outcome = if u < 0.8 {
                MaskOutcome::Mask
            } else if u < 0.9 {
                MaskOutcome::Keep
            } else {
                MaskOutcome::Random(rng.random_range(N_SPECIAL..vocab_size))
            };
            match outcome {
                MaskOutcome::Mask => *id = MASK,
                MaskOutcome::Random(r) => *id = r,
                MaskOutcome::Keep => {}
            }
            Some(outcome)
        })
        .collect()
}

/// Draws NSP pairs from a corpus of one sentence per line; blank lines
/// separate documents, and "next sentence" never crosses a document boundary.
#[derive(Debug, Clone)]
pub struct PretrainSampler {
    sentences: Vec<Vec<usize>>,
    /// Indices `i` whose successor `i + 1` is in the same document.
    starts: Vec<usize>,
    vocab_size: usize,
    max_seq_len: usize,
    truncated: usize,
}

impl PretrainSampler {
    pub fn new<'a>(lines: impl IntoIterator<Item = &'a str>, vocab: &Vocab, max_seq_len: usize) -> Result<Self> {
        if max_seq_len < 5 {
            return domain_err(format!("max_seq_len {max_seq_len} cannot hold a sentence pair"));
        }
        let mut sentences = Vec::new();
        let mut starts = Vec::new();
        let mut prev_in_doc = false;
        for line in lines {
            let ids = vocab.encode(line);
            if ids.is_empty() {
                prev_in_doc = false;
                continue;
            }
            if prev_in_doc {
                starts.push(sentences.len() - 1);
            }
            sentences.push(ids);
            prev_in_doc = true;
        }
        if sentences.is_empty() {
            return domain_err("empty corpus");
        }
        if starts.is_empty() {
            return domain_err("corpus has no pair of consecutive sentences");
        }
        Ok(Self {
            sentences,
            starts,
            vocab_size: vocab.len(),
            max_seq_len,
            truncated: 0,
        })
    }

    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    /// Number of pairs that had to be shortened so far.
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> PretrainExample {
        let i = self.starts[rng.random_range(0..self.starts.len())];
        let (j, nsp_label) = if rng.random::<bool>() || self.sentences.len() < 3 {
            (i + 1, 0)
        } else {
            let mut j = rng.random_range(0..self.sentences.len());
            while j == i + 1 || j == i {
                j = rng.random_range(0..self.sentences.len());
            }
            (j, 1)
        };
        let mut a = self.sentences[i].clone();
        let mut b = self.sentences[j].clone();
        let budget = self.max_seq_len - 3;
        if a.len() + b.len() > budget {
            self.truncated += 1;
            debug!("truncating pair ({}, {}) to {budget} tokens", a.len(), b.len());
            while a.len() + b.len() > budget {
                if a.len() >= b.len() {
                    a.pop();
                } else {
                    b.pop();
                }
            }
        }
        let mut token_ids = Vec::with_capacity(self.max_seq_len);
        token_ids.push(CLS);
        token_ids.extend(&a);
        token_ids.push(SEP);
        let seg_a = token_ids.len();
        token_ids.extend(&b);
        token_ids.push(SEP);
        let mut segment_ids: Vec<usize> = (0..token_ids.len()).map(|k| usize::from(k >= seg_a)).collect();
        let original = token_ids.clone();
        let outcomes = mask_tokens(&mut token_ids, self.vocab_size, rng);
        let mut mlm_labels: Vec<Option<usize>> = outcomes.iter().zip(&original).map(|(o, &t)| o.map(|_| t)).collect();
        token_ids.resize(self.max_seq_len, PAD);
        segment_ids.resize(self.max_seq_len, 0);
        mlm_labels.resize(self.max_seq_len, None);
        PretrainExample {
            token_ids,
            segment_ids,
            mlm_labels,
            nsp_label,
        }
    }

    pub fn batch<R: Rng + ?Sized>(&mut self, size: usize, rng: &mut R) -> PretrainBatch {
        PretrainBatch {
            examples: (0..size).map(|_| self.sample(rng)).collect(),
        }
    }
}
