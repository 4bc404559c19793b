use rand::RngCore;

use super::config::ModelConfig;
use super::{ClassifyOutput, Classifier};
use crate::autodiff::{ParamId, ParamOptions, ParamStore};
use crate::ctensor::CTensor;
use crate::data::{FinetuneBatch, CLS, PAD, SEP};
use crate::error::{domain_err, Result};
use crate::layers::heads::softmax_cross_entropy;
use crate::layers::norm::NormCache;
use crate::layers::{MeasurementHead, Norm, NormKind};

/// Bag-of-words quantum classifier: `ψ = unit(mean of word embeddings)`
/// followed by the measurement head.
#[derive(Debug, Clone)]
pub struct QclsEnd2End {
    pub config: ModelConfig,
    pub tokens: ParamId,
    pub head: MeasurementHead,
}

pub struct BowCache {
    words: Vec<usize>,
    norm: NormCache,
}

impl QclsEnd2End {
    pub fn new(config: ModelConfig, store: &mut ParamStore) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let tokens = store.add("emb.tokens", CTensor::zeros(&[config.vocab_size, d]), ParamOptions::default())?;
        let head = MeasurementHead::register(store, "cls", d, config.n_classes, false)?;
        Ok(Self { config, tokens, head })
    }

    /// Unit state of a token sequence; `[CLS]`, `[SEP]` and `[PAD]` are skipped.
    pub fn state(&self, store: &ParamStore, tokens: &[usize]) -> Result<(CTensor, BowCache)> {
        let words: Vec<usize> = tokens.iter().copied().filter(|t| ![PAD, CLS, SEP].contains(t)).collect();
        if words.is_empty() {
            return domain_err("sequence has no word tokens");
        }
        let table = store.value(self.tokens);
        let (vocab, d) = table.dims2()?;
        let mut mean = CTensor::zeros(&[1, d]);
        for &w in &words {
            if w >= vocab {
                return domain_err(format!("token id {w} outside vocabulary of {vocab}"));
            }
            for (a, &b) in mean.row_mut(0).iter_mut().zip(table.row(w)) {
                *a += b;
            }
        }
        let mean = mean.scale_real(1.0 / words.len() as f64);
        let (psi, norm) = Norm::plain(NormKind::UnitNorm).forward_with_cache(store, &mean)?;
        Ok((psi, BowCache { words, norm }))
    }

    fn state_backward(&self, store: &mut ParamStore, cache: &BowCache, g_psi: &CTensor) -> Result<()> {
        let g_mean = Norm::plain(NormKind::UnitNorm).backward_with_cache(store, &cache.norm, g_psi)?;
        let g_mean = g_mean.scale_real(1.0 / cache.words.len() as f64);
        let mut g = CTensor::zeros(store.value(self.tokens).shape());
        for &w in &cache.words {
            for (a, &b) in g.row_mut(w).iter_mut().zip(g_mean.data()) {
                *a += b;
            }
        }
        store.accumulate(self.tokens, &g)
    }
}

impl Classifier for QclsEnd2End {
    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn logits(&self, store: &ParamStore, tokens: &[usize], _segments: &[usize]) -> Result<Vec<f64>> {
        let (psi, _) = self.state(store, tokens)?;
        Ok(self.head.forward(store, &psi)?.0.remove(0))
    }

    fn predict(&self, store: &ParamStore, batch: &FinetuneBatch) -> Result<Vec<Vec<f64>>> {
        let states = batch.token_ids.iter().map(|t| Ok(self.state(store, t)?.0)).collect::<Result<Vec<_>>>()?;
        Ok(self.head.forward(store, &stack_rows(&states)?)?.0)
    }

    fn finetune_grads(&self, store: &mut ParamStore, batch: &FinetuneBatch, _training: bool, _rng: &mut dyn RngCore) -> Result<ClassifyOutput> {
        batch.check_labels(self.config.n_classes)?;
        let mut states = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        for tokens in &batch.token_ids {
            let (psi, cache) = self.state(store, tokens)?;
            states.push(psi);
            caches.push(cache);
        }
        let (out, g_psi) = head_step(&self.head, store, &stack_rows(&states)?, &batch.class_labels)?;
        for (r, cache) in caches.iter().enumerate() {
            let g = CTensor::from_vec(&[1, g_psi.dims2()?.1], g_psi.row(r).to_vec())?;
            self.state_backward(store, cache, &g)?;
        }
        Ok(out)
    }
}

/// Concatenates `[1, d]` states into `[n, d]`.
pub(crate) fn stack_rows(states: &[CTensor]) -> Result<CTensor> {
    let d = states.first().map(|s| s.len()).unwrap_or(0);
    let data = states.iter().flat_map(|s| s.data().iter().copied()).collect();
    CTensor::from_vec(&[states.len(), d], data)
}

/// Mean cross-entropy through the measurement head for a stack of states;
/// returns the loss, logits and the cotangent of the states.
pub(crate) fn head_step(head: &MeasurementHead, store: &mut ParamStore, psi: &CTensor, labels: &[usize]) -> Result<(ClassifyOutput, CTensor)> {
    let n = labels.len().max(1) as f64;
    let (logits, hc) = head.forward(store, psi)?;
    let mut out = ClassifyOutput::default();
    let mut grads = Vec::with_capacity(labels.len());
    for (l, &y) in logits.iter().zip(labels) {
        let (loss, g) = softmax_cross_entropy(l, y);
        out.loss += loss / n;
        grads.push(g.into_iter().map(|v| v / n).collect());
    }
    let g_psi = head.backward(store, &hc, &grads)?;
    out.logits = logits;
    Ok((out, g_psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check_fn, DEFAULT_STEP};
    use crate::models::{AnyClassifier, Arch, QBert, Mode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 30,
            d_model: 8,
            ..ModelConfig::default()
        }
    }

    fn build() -> (QclsEnd2End, ParamStore) {
        match AnyClassifier::initialized(Arch::QclsEnd2End, cfg()).unwrap() {
            (AnyClassifier::End2End(m), s) => (m, s),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_token_state() {
        let (m, store) = build();
        let (psi, _) = m.state(&store, &[CLS, 7, SEP]).unwrap();
        let row = store.value(m.tokens).row(7).to_vec();
        let n = crate::ctensor::vec_norm(&row);
        for (a, b) in psi.data().iter().zip(&row) {
            assert!((a - b / n).norm() < 1e-14);
        }
    }

    #[test]
    fn degenerate_inputs_are_domain_errors() {
        let (m, mut store) = build();
        assert!(matches!(m.state(&store, &[CLS, SEP]), Err(crate::Error::Domain(_))));
        *store.value_mut(m.tokens) = CTensor::zeros(&[30, 8]);
        assert!(matches!(m.state(&store, &[CLS, 7, 9, SEP]), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn bag_of_words_invariance() {
        let (m, store) = build();
        let a = m.logits(&store, &[CLS, 5, 6, 7, 8, SEP], &[0; 6]).unwrap();
        let b = m.logits(&store, &[CLS, 8, 6, 5, 7, SEP], &[0; 6]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (m, mut store) = build();
        let batch = FinetuneBatch {
            token_ids: vec![vec![CLS, 5, 6, 5, SEP], vec![CLS, 9, SEP]],
            segment_ids: vec![vec![0; 5], vec![0; 3]],
            class_labels: vec![1, 0],
        };
        let ids: Vec<ParamId> = store.ids().collect();
        let report = grad_check_fn(&mut store, &ids, &CTensor::zeros(&[1]), DEFAULT_STEP, |store, x, need| {
            let logits = m.predict(store, &batch)?;
            let loss = logits.iter().zip(&batch.class_labels).map(|(l, &y)| softmax_cross_entropy(l, y).0).sum::<f64>() / 2.0;
            if need {
                m.finetune_grads(store, &batch, true, &mut ChaCha8Rng::seed_from_u64(0))?;
                return Ok((loss, Some(CTensor::zeros(x.shape()))));
            }
            Ok((loss, None))
        })
        .unwrap();
        assert!(report.passes(1e-5), "{report}");
    }

    #[test]
    fn transformer_baseline_is_the_finetune_path() {
        let c = ModelConfig { dropout_p: 0.0, ..cfg() };
        let (any, store) = AnyClassifier::initialized(Arch::Qbert, c.clone()).unwrap();
        let (direct, store2) = QBert::initialized(c, Mode::Finetune).unwrap();
        let toks = [CLS, 5, 9, 11, SEP];
        let a = any.logits(&store, &toks, &[0; 5]).unwrap();
        let b = direct.logits(&store2, &toks, &[0; 5]).unwrap();
        assert_eq!(a, b);
    }
}
