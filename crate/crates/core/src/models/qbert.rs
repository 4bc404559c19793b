use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, NormName};
use super::encoder::{EncoderLayer, LayerCache, LayerSpec};
use super::init::init_weights;
use super::qcls::{head_step, stack_rows};
use super::{ClassifyOutput, Classifier};
use crate::autodiff::{ParamId, ParamStore};
use crate::ctensor::CTensor;
use crate::data::{FinetuneBatch, PretrainBatch, PretrainExample, PAD};
use crate::error::{domain_err, Error, Result};
use crate::layers::dropout::dropout_backward;
use crate::layers::heads::{softmax_cross_entropy, MlmCache, NspCache};
use crate::layers::norm::NormCache;
use crate::layers::regularizers::{row_dependence, weight_defect};
use crate::layers::{complex_dropout, Embeddings, MeasurementHead, MlmHead, Norm, NspHead};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// MLM and NSP heads attached.
    Pretrain,
    /// Measurement classification head on the [CLS] state.
    Finetune,
}

/// Complex BERT encoder with pretraining or classification heads.
///
/// Built in finetune mode without loading pretrained weights it is the
/// directly trained transformer classifier baseline.
#[derive(Debug, Clone)]
pub struct QBert {
    pub config: ModelConfig,
    pub mode: Mode,
    pub embeddings: Embeddings,
    pub embed_norm: Norm,
    pub layers: Vec<EncoderLayer>,
    pub mlm: Option<MlmHead>,
    pub nsp: Option<NspHead>,
    pub classifier: Option<MeasurementHead>,
}

#[derive(Debug, Clone)]
pub struct EncodeCache {
    tokens: Vec<usize>,
    segments: Vec<usize>,
    drop0: Option<Vec<f64>>,
    embed_norm: NormCache,
    pub layers: Vec<LayerCache>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PretrainLosses {
    pub mlm: f64,
    pub nsp: f64,
    pub reg: f64,
}

impl PretrainLosses {
    pub fn total(&self) -> f64 {
        self.mlm + self.nsp + self.reg
    }
}

struct ExampleForward {
    encode: EncodeCache,
    mlm: MlmCache,
    mlm_logits: Vec<Vec<f64>>,
    labels: Vec<usize>,
    nsp: NspCache,
    nsp_probs: [f64; 2],
}

impl QBert {
    pub fn new(config: ModelConfig, mode: Mode, store: &mut ParamStore) -> Result<Self> {
        config.validate()?;
        if mode == Mode::Finetune && !matches!(config.norm_kind, NormName::MixedLn | NormName::UnitNorm) {
            return Err(Error::Config(format!(
                "the measurement head needs a unit [CLS] state; norm_kind {:?} does not provide one (use mixed-ln)",
                config.norm_kind
            )));
        }
        let d = config.d_model;
        let embeddings = Embeddings::register(store, "emb", config.vocab_size, config.max_seq_len, 2, d)?;
        let embed_norm = Norm::register(store, "emb_norm", config.norm(), d)?;
        let spec = LayerSpec {
            d_model: d,
            d_hidden: config.d_hidden,
            n_heads: config.n_heads,
            attention: config.attention(),
            hidden: config.hidden(),
            norm: config.norm(),
            with_q_o: !config.remove_q_o_projections,
            dropout_p: config.dropout_p,
        };
        let layers = (0..config.n_layers)
            .map(|i| EncoderLayer::register(store, &format!("layer{i}"), &spec))
            .collect::<Result<Vec<_>>>()?;
        let (mlm, nsp, classifier) = match mode {
            Mode::Pretrain => {
                let tied = config.tie_mlm_embeddings.then_some(embeddings.tokens);
                (
                    Some(MlmHead::register(store, "mlm", d, config.vocab_size, config.hidden(), tied)?),
                    Some(NspHead::register(store, "nsp", d)?),
                    None,
                )
            }
            Mode::Finetune => (None, None, Some(MeasurementHead::register(store, "cls", d, config.n_classes, false)?)),
        };
        Ok(Self {
            config,
            mode,
            embeddings,
            embed_norm,
            layers,
            mlm,
            nsp,
            classifier,
        })
    }

    /// Registers the model in a fresh store and draws weights from `config.seed`.
    pub fn initialized(config: ModelConfig, mode: Mode) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let model = Self::new(config, mode, &mut store)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        init_weights(&mut store, model.config.init, model.config.init_std, &mut rng);
        Ok((model, store))
    }

    /// Attention projection matrices per layer (2 without Q/O, else 4).
    pub fn attention_projections_per_layer(&self) -> usize {
        self.layers.first().map_or(0, |l| l.attn.projections().len())
    }

    pub fn dense_weights(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(EncoderLayer::dense_weights).collect()
    }

    /// Final hidden states `[seq, d]`; PAD tokens are masked out as keys.
    pub fn encode(&self, store: &ParamStore, tokens: &[usize], segments: &[usize], training: bool, rng: &mut dyn RngCore) -> Result<(CTensor, EncodeCache)> {
        if tokens.is_empty() {
            return domain_err("empty sequence");
        }
        if tokens.len() > self.config.max_seq_len {
            return domain_err(format!("sequence of {} tokens exceeds max_seq_len {}", tokens.len(), self.config.max_seq_len));
        }
        let positions: Vec<usize> = (0..tokens.len()).collect();
        let e = self.embeddings.forward(store, tokens, &positions, segments)?;
        let (e, drop0) = complex_dropout(&e, self.config.dropout_p, training, rng)?;
        let (mut h, embed_norm) = self.embed_norm.forward_with_cache(store, &e)?;
        let mask: Vec<bool> = tokens.iter().map(|&t| t == PAD).collect();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, c) = layer.forward(store, &h, &mask, training, rng)?;
            h = out;
            layers.push(c);
        }
        Ok((
            h,
            EncodeCache {
                tokens: tokens.to_vec(),
                segments: segments.to_vec(),
                drop0,
                embed_norm,
                layers,
            },
        ))
    }

    /// `attn_extra[layer][head]` adds cotangents on attention weights.
    pub fn encode_backward(&self, store: &mut ParamStore, cache: &EncodeCache, grad: &CTensor, attn_extra: Option<&[Vec<CTensor>]>) -> Result<()> {
        let mut g = grad.clone();
        for (i, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            g = layer.backward(store, c, &g, attn_extra.map(|e| e[i].as_slice()))?;
        }
        let g = self.embed_norm.backward_with_cache(store, &cache.embed_norm, &g)?;
        let g = dropout_backward(&g, cache.drop0.as_deref());
        let positions: Vec<usize> = (0..cache.tokens.len()).collect();
        self.embeddings.backward(store, &cache.tokens, &positions, &cache.segments, &g)
    }

    /// [CLS] hidden vector after the last layer, in inference mode.
    pub fn cls_state(&self, store: &ParamStore, tokens: &[usize], segments: &[usize]) -> Result<CTensor> {
        let (h, _) = self.encode(store, tokens, segments, false, &mut ChaCha8Rng::seed_from_u64(0))?;
        Ok(CTensor::vector(h.row(0).to_vec()))
    }

    fn pretrain_heads(&self) -> Result<(&MlmHead, &NspHead)> {
        match (&self.mlm, &self.nsp) {
            (Some(m), Some(n)) => Ok((m, n)),
            _ => Err(Error::Config("model was built for fine-tuning, not pretraining".into())),
        }
    }

    fn classifier(&self) -> Result<&MeasurementHead> {
        self.classifier.as_ref().ok_or_else(|| Error::Config("model was built for pretraining, not fine-tuning".into()))
    }

    fn pretrain_example(&self, store: &ParamStore, ex: &PretrainExample, training: bool, rng: &mut dyn RngCore) -> Result<ExampleForward> {
        let (mlm, nsp) = self.pretrain_heads()?;
        let (h, encode) = self.encode(store, &ex.token_ids, &ex.segment_ids, training, rng)?;
        let (positions, labels) = ex.masked();
        let (mlm_logits, mlm_cache) = mlm.forward(store, &h, &positions)?;
        let (nsp_probs, nsp_cache) = nsp.forward(store, &CTensor::vector(h.row(0).to_vec()))?;
        Ok(ExampleForward {
            encode,
            mlm: mlm_cache,
            mlm_logits,
            labels,
            nsp: nsp_cache,
            nsp_probs,
        })
    }

    /// Batch losses without touching gradients (inference mode).
    pub fn pretrain_loss(&self, store: &ParamStore, batch: &PretrainBatch) -> Result<PretrainLosses> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n_masked = batch.n_masked().max(1) as f64;
        let b = batch.len().max(1) as f64;
        let mut out = PretrainLosses::default();
        for ex in &batch.examples {
            let f = self.pretrain_example(store, ex, false, &mut rng)?;
            for (l, &y) in f.mlm_logits.iter().zip(&f.labels) {
                out.mlm += softmax_cross_entropy(l, y).0 / n_masked;
            }
            out.nsp += -f.nsp_probs[ex.nsp_label].max(f64::MIN_POSITIVE).ln() / b;
        }
        out.reg = self.regularizer(store, batch)?;
        Ok(out)
    }

    /// Forward and backward over a batch, accumulating cotangents of
    /// `L_MLM + L_NSP + L_reg` into the store. `L_MLM` averages over every
    /// masked position in the batch, `L_NSP` over sequences.
    pub fn pretrain_grads(&self, store: &mut ParamStore, batch: &PretrainBatch, training: bool, rng: &mut dyn RngCore) -> Result<PretrainLosses> {
        let (mlm, nsp) = self.pretrain_heads()?;
        let reg = self.config.reg();
        let n_masked = batch.n_masked().max(1) as f64;
        let b = batch.len().max(1) as f64;
        let mut out = PretrainLosses::default();
        for ex in &batch.examples {
            let f = self.pretrain_example(store, ex, training, rng)?;
            let mut grad_logits = Vec::with_capacity(f.labels.len());
            for (l, &y) in f.mlm_logits.iter().zip(&f.labels) {
                let (loss, g) = softmax_cross_entropy(l, y);
                out.mlm += loss / n_masked;
                grad_logits.push(g.into_iter().map(|v| v / n_masked).collect::<Vec<_>>());
            }
            let mut gh = mlm.backward(store, &f.mlm, &grad_logits)?;
            let (nsp_loss, g_cls) = nsp.backward(store, &f.nsp, ex.nsp_label, 1.0 / b)?;
            out.nsp += nsp_loss / b;
            for (a, &g) in gh.row_mut(0).iter_mut().zip(g_cls.data()) {
                *a += g;
            }
            let extra = if reg.kind.attention() && reg.lambda > 0.0 {
                let mut all = Vec::with_capacity(self.layers.len());
                for c in &f.encode.layers {
                    let mut per_head = Vec::with_capacity(c.attn.heads.len());
                    for hc in &c.attn.heads {
                        let (l, cot) = row_dependence(&hc.weights)?;
                        out.reg += reg.lambda * l / b;
                        per_head.push(cot.scale_real(reg.lambda / b));
                    }
                    all.push(per_head);
                }
                Some(all)
            } else {
                None
            };
            self.encode_backward(store, &f.encode, &gh, extra.as_deref())?;
        }
        out.reg += self.dense_regularizer_grads(store)?;
        Ok(out)
    }

    fn regularizer(&self, store: &ParamStore, batch: &PretrainBatch) -> Result<f64> {
        let reg = self.config.reg();
        if reg.lambda == 0.0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if reg.kind.attention() {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let b = batch.len().max(1) as f64;
            for ex in &batch.examples {
                let (_, c) = self.encode(store, &ex.token_ids, &ex.segment_ids, false, &mut rng)?;
                for lc in &c.layers {
                    for hc in &lc.attn.heads {
                        total += reg.lambda * row_dependence(&hc.weights)?.0 / b;
                    }
                }
            }
        }
        if reg.kind.dense() {
            for w in self.dense_weights() {
                total += reg.lambda * weight_defect(store.value(w))?.0;
            }
        }
        Ok(total)
    }

    fn dense_regularizer_grads(&self, store: &mut ParamStore) -> Result<f64> {
        let reg = self.config.reg();
        if !reg.kind.dense() || reg.lambda == 0.0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for w in self.dense_weights() {
            let (l, cot) = weight_defect(store.value(w))?;
            total += reg.lambda * l;
            store.accumulate(w, &cot.scale_real(reg.lambda))?;
        }
        Ok(total)
    }
}

impl Classifier for QBert {
    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn logits(&self, store: &ParamStore, tokens: &[usize], segments: &[usize]) -> Result<Vec<f64>> {
        let head = self.classifier()?;
        let psi = self.cls_state(store, tokens, segments)?;
        let d = psi.len();
        Ok(head.forward(store, &psi.reshape(&[1, d])?)?.0.remove(0))
    }

    fn predict(&self, store: &ParamStore, batch: &FinetuneBatch) -> Result<Vec<Vec<f64>>> {
        let head = self.classifier()?;
        let mut states = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let psi = self.cls_state(store, &batch.token_ids[i], &batch.segment_ids[i])?;
            let d = psi.len();
            states.push(psi.reshape(&[1, d])?);
        }
        Ok(head.forward(store, &stack_rows(&states)?)?.0)
    }

    fn finetune_grads(&self, store: &mut ParamStore, batch: &FinetuneBatch, training: bool, rng: &mut dyn RngCore) -> Result<ClassifyOutput> {
        let head = self.classifier()?;
        batch.check_labels(self.config.n_classes)?;
        let mut states = Vec::with_capacity(batch.len());
        let mut encoded = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let (h, cache) = self.encode(store, &batch.token_ids[i], &batch.segment_ids[i], training, rng)?;
            let (_, d) = h.dims2()?;
            states.push(CTensor::from_vec(&[1, d], h.row(0).to_vec())?);
            encoded.push((h.shape().to_vec(), cache));
        }
        let (out, g_psi) = head_step(head, store, &stack_rows(&states)?, &batch.class_labels)?;
        for (r, (shape, cache)) in encoded.iter().enumerate() {
            let mut gh = CTensor::zeros(shape);
            gh.row_mut(0).copy_from_slice(g_psi.row(r));
            self.encode_backward(store, cache, &gh, None)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check_fn, DEFAULT_STEP};
    use crate::ctensor::vec_norm;
    use crate::data::{synthetic_corpus, LabeledText, PretrainSampler, Vocab};
    use crate::models::config::{AttnKind, RegName};

    fn tiny(vocab: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: vocab,
            d_model: 8,
            d_hidden: 4,
            n_layers: 2,
            n_heads: 2,
            max_seq_len: 16,
            dropout_p: 0.0,
            ..ModelConfig::default()
        }
    }

    fn corpus_batch(cfg: &ModelConfig, n: usize, seed: u64) -> (Vocab, PretrainBatch) {
        let lines = synthetic_corpus(200, 0);
        let vocab = Vocab::build(lines.iter().map(String::as_str), 2, cfg.vocab_size).unwrap();
        let mut s = PretrainSampler::new(lines.iter().map(String::as_str), &vocab, cfg.max_seq_len).unwrap();
        let batch = s.batch(n, &mut ChaCha8Rng::seed_from_u64(seed));
        (vocab, batch)
    }

    #[test]
    fn step_zero_losses() {
        let lines = synthetic_corpus(200, 0);
        let vocab = Vocab::build(lines.iter().map(String::as_str), 2, 512).unwrap();
        let cfg = ModelConfig {
            vocab_size: vocab.len(),
            ..ModelConfig::default()
        };
        for tie in [false, true] {
            let cfg = ModelConfig {
                tie_mlm_embeddings: tie,
                ..cfg.clone()
            };
            let (model, store) = QBert::initialized(cfg.clone(), Mode::Pretrain).unwrap();
            let (_, batch) = corpus_batch(&cfg, 32, 1);
            let l = model.pretrain_loss(&store, &batch).unwrap();
            let ln_v = (cfg.vocab_size as f64).ln();
            assert!((l.mlm / ln_v - 1.0).abs() < 0.1, "tie {tie}: mlm {} vs ln V {ln_v}", l.mlm);
            assert!((l.nsp / 2f64.ln() - 1.0).abs() < 0.2, "nsp {}", l.nsp);
        }
    }

    #[test]
    fn step_zero_classification_loss() {
        let cfg = ModelConfig {
            vocab_size: 64,
            n_classes: 3,
            ..ModelConfig::default()
        };
        let (model, store) = QBert::initialized(cfg, Mode::Finetune).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows: Vec<LabeledText> = (0..30).map(|i| LabeledText { label: i % 3, text: format!("w{} w{}", i % 7, i % 5) }).collect();
        let vocab = Vocab::build(["w0 w1 w2 w3 w4 w5 w6"], 1, 64).unwrap();
        let batch = FinetuneBatch::encode(&rows, &vocab, 16);
        let mut s = store.clone();
        let out = model.finetune_grads(&mut s, &batch, false, &mut rng).unwrap();
        assert!((out.loss / 3f64.ln() - 1.0).abs() < 0.2, "{}", out.loss);
    }

    #[test]
    fn cls_state_is_unit_at_every_layer() {
        let cfg = tiny(40);
        let (model, store) = QBert::initialized(cfg, Mode::Finetune).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let len = 2 + trial % 10;
            let tokens: Vec<usize> = (0..len).map(|i| if i == 0 { crate::data::CLS } else { 5 + (i * 7 + trial) % 35 }).collect();
            let segs = vec![0; len];
            let (h, cache) = model.encode(&store, &tokens, &segs, true, &mut rng).unwrap();
            assert!((vec_norm(h.row(0)) - 1.0).abs() < 1e-10);
            for c in &cache.layers {
                assert!((vec_norm(c.attn.input.row(0)) - 1.0).abs() < 1e-10);
            }
            let psi = model.cls_state(&store, &tokens, &segs).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn mode_mismatch_is_a_config_error() {
        let cfg = tiny(40);
        let (pre, mut ps) = QBert::initialized(cfg.clone(), Mode::Pretrain).unwrap();
        let (fine, mut fs) = QBert::initialized(cfg.clone(), Mode::Finetune).unwrap();
        let (_, pb) = corpus_batch(&ModelConfig { vocab_size: 512, ..cfg.clone() }, 2, 0);
        let fb = FinetuneBatch {
            token_ids: vec![vec![2, 5, 3]],
            segment_ids: vec![vec![0; 3]],
            class_labels: vec![1],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(pre.finetune_grads(&mut ps, &fb, false, &mut rng), Err(Error::Config(_))));
        assert!(matches!(fine.pretrain_grads(&mut fs, &pb, false, &mut rng), Err(Error::Config(_))));
        let bad = ModelConfig {
            norm_kind: NormName::ComplexLn,
            ..cfg
        };
        assert!(matches!(QBert::initialized(bad, Mode::Finetune), Err(Error::Config(_))));
    }

    #[test]
    fn projection_count_and_depth() {
        let base = ModelConfig { vocab_size: 40, ..ModelConfig::default() };
        let mut s = ParamStore::new();
        let full = QBert::new(base.clone(), Mode::Pretrain, &mut s).unwrap();
        assert_eq!(full.attention_projections_per_layer(), 4);
        let slim_cfg = ModelConfig {
            remove_q_o_projections: true,
            tie_mlm_embeddings: true,
            ..base.clone()
        };
        let mut s2 = ParamStore::new();
        let slim = QBert::new(slim_cfg, Mode::Pretrain, &mut s2).unwrap();
        assert_eq!(slim.attention_projections_per_layer(), 2);
        assert!(s2.names().all(|n| !n.contains(".wq.") && !n.contains(".wo.") && !n.starts_with("mlm.decoder")));
        let d = base.d_model;
        // Q and O weights plus biases per layer, and the untied decoder
        let dropped = base.n_layers * 2 * (d * d + d) + (base.vocab_size * d + base.vocab_size);
        assert_eq!(s.num_scalars() - s2.num_scalars(), dropped);

        let count = |n: usize| {
            let mut st = ParamStore::new();
            QBert::new(ModelConfig { n_layers: n, ..base.clone() }, Mode::Finetune, &mut st).unwrap();
            st.num_scalars()
        };
        let per_layer = (count(6) - count(3)) / 3;
        assert_eq!(count(12) - count(3), 9 * per_layer);
        let mut st = ParamStore::new();
        let m = QBert::new(base.clone(), Mode::Finetune, &mut st).unwrap();
        let layer_scalars: usize = st.iter().filter(|p| p.name.starts_with("layer0.")).map(|p| p.numel()).sum();
        assert_eq!(per_layer, layer_scalars);
        assert_eq!(m.layers.len(), base.n_layers);
    }

    #[test]
    fn pretrain_gradients_match_finite_differences() {
        for (attn, reg) in [(AttnKind::ModSoftmax, RegName::BothOrtho), (AttnKind::SqZrelu, RegName::None), (AttnKind::SplitSoftmax, RegName::AttOrtho)] {
            let cfg = ModelConfig {
                attn_activation: attn,
                reg_kind: reg,
                reg_lambda: 0.05,
                tie_mlm_embeddings: reg == RegName::None,
                ..tiny(512)
            };
            let (vocab, batch) = corpus_batch(&cfg, 2, 4);
            let cfg = ModelConfig { vocab_size: vocab.len(), ..cfg };
            let (model, mut store) = QBert::initialized(cfg, Mode::Pretrain).unwrap();
            let ids: Vec<ParamId> = store.ids().collect();
            // small step: some decoder outputs sit near |z| = 0 where the modulus curves sharply
            let report = grad_check_fn(&mut store, &ids, &CTensor::zeros(&[1]), 1e-6, |store, x, need| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let l = model.pretrain_loss(store, &batch)?;
                if !need {
                    return Ok((l.total(), None));
                }
                let g = model.pretrain_grads(store, &batch, false, &mut rng)?;
                assert!((g.total() - l.total()).abs() < 1e-12);
                Ok((l.total(), Some(CTensor::zeros(x.shape()))))
            })
            .unwrap();
            assert!(report.passes(1e-5), "{attn:?}\n{report}");
        }
    }

    #[test]
    fn finetune_gradients_match_finite_differences() {
        let cfg = tiny(20);
        let (model, mut store) = QBert::initialized(cfg, Mode::Finetune).unwrap();
        let batch = FinetuneBatch {
            token_ids: vec![vec![2, 5, 9, 3], vec![2, 7, 3]],
            segment_ids: vec![vec![0; 4], vec![0; 3]],
            class_labels: vec![1, 0],
        };
        let ids: Vec<ParamId> = store.ids().collect();
        let report = grad_check_fn(&mut store, &ids, &CTensor::zeros(&[1]), DEFAULT_STEP, |store, x, need| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let logits = model.predict(store, &batch)?;
            let loss: f64 = logits.iter().zip(&batch.class_labels).map(|(l, &y)| softmax_cross_entropy(l, y).0).sum::<f64>() / 2.0;
            if !need {
                return Ok((loss, None));
            }
            let out = model.finetune_grads(store, &batch, false, &mut rng)?;
            assert!((out.loss - loss).abs() < 1e-12);
            Ok((loss, Some(CTensor::zeros(x.shape()))))
        })
        .unwrap();
        assert!(report.passes(1e-5), "{report}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let cfg = tiny(512);
        let (vocab, batch) = corpus_batch(&cfg, 4, 2);
        let cfg = ModelConfig { vocab_size: vocab.len(), dropout_p: 0.1, ..cfg };
        let run = || {
            let (model, mut store) = QBert::initialized(cfg.clone(), Mode::Pretrain).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let l = model.pretrain_grads(&mut store, &batch, true, &mut rng).unwrap();
            (l.total().to_bits(), store.grad_norm().to_bits())
        };
        assert_eq!(run(), run());
    }
}
