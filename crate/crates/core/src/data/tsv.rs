use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Vocab, CLS, SEP};
use crate::error::{at_path, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub label: usize,
    pub text: String,
}

/// Reads `label<TAB>text` rows. Blank lines are skipped; any other
/// malformed row fails with its line number.
pub fn read_tsv(path: &Path) -> Result<Vec<LabeledText>> {
    let content = at_path(path, fs::read_to_string(path))?;
    parse_tsv(&content, path)
}

pub(crate) fn parse_tsv(content: &str, path: &Path) -> Result<Vec<LabeledText>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| err(i + 1, "expected `label<TAB>text`".into()))?;
        let label = label.trim().parse::<usize>().map_err(|_| err(i + 1, format!("label `{label}` is not a non-negative integer")))?;
        if text.trim().is_empty() {
            return Err(err(i + 1, "empty text".into()));
        }
        rows.push(LabeledText { label, text: text.to_string() });
    }
    Ok(rows)
}

pub fn write_tsv(path: &Path, rows: &[LabeledText]) -> Result<()> {
    let mut f = std::io::BufWriter::new(at_path(path, fs::File::create(path))?);
    for r in rows {
        writeln!(f, "{}\t{}", r.label, r.text)?;
    }
    f.flush()?;
    Ok(())
}

/// Encoded `[CLS] text [SEP]` sequences with their class labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FinetuneBatch {
    pub token_ids: Vec<Vec<usize>>,
    pub segment_ids: Vec<Vec<usize>>,
    pub class_labels: Vec<usize>,
}

impl FinetuneBatch {
    pub fn encode(rows: &[LabeledText], vocab: &Vocab, max_seq_len: usize) -> Self {
        let mut batch = Self::default();
        for r in rows {
            let mut ids = vec![CLS];
            ids.extend(vocab.encode(&r.text).into_iter().take(max_seq_len.saturating_sub(2)));
            ids.push(SEP);
            batch.segment_ids.push(vec![0; ids.len()]);
            batch.token_ids.push(ids);
            batch.class_labels.push(r.label);
        }
        batch
    }

    pub fn len(&self) -> usize {
        self.class_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_labels.is_empty()
    }

    /// Rows `idx` as a new batch.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            token_ids: idx.iter().map(|&i| self.token_ids[i].clone()).collect(),
            segment_ids: idx.iter().map(|&i| self.segment_ids[i].clone()).collect(),
            class_labels: idx.iter().map(|&i| self.class_labels[i]).collect(),
        }
    }

    pub fn check_labels(&self, n_classes: usize) -> Result<()> {
        match self.class_labels.iter().position(|&l| l >= n_classes) {
            Some(i) => Err(Error::Config(format!("row {i} has label {} but the model has {n_classes} classes", self.class_labels[i]))),
            None => Ok(()),
        }
    }
}
