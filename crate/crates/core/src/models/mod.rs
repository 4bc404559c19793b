//! Model assemblies: the complex BERT encoder with pretraining and
//! classification heads, and the bag-of-words quantum classifier.

pub mod config;
pub mod encoder;
pub mod init;
pub mod qbert;
pub mod qcls;

pub use config::{AttnKind, HiddenKind, InitScheme, ModelConfig, NormName, RegName};
pub use encoder::EncoderLayer;
pub use init::init_weights;
pub use qbert::{Mode, PretrainLosses, QBert};
pub use qcls::QclsEnd2End;

use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ParamStore;
use crate::data::FinetuneBatch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifyOutput {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub logits: Vec<Vec<f64>>,
}

/// A model that maps a token sequence to class logits.
pub trait Classifier {
    fn n_classes(&self) -> usize;

    /// Inference-mode logits of one sequence.
    fn logits(&self, store: &ParamStore, tokens: &[usize], segments: &[usize]) -> Result<Vec<f64>>;

    /// Forward and backward over a batch; accumulates cotangents of the mean
    /// cross-entropy.
    fn finetune_grads(&self, store: &mut ParamStore, batch: &FinetuneBatch, training: bool, rng: &mut dyn RngCore) -> Result<ClassifyOutput>;

    fn predict(&self, store: &ParamStore, batch: &FinetuneBatch) -> Result<Vec<Vec<f64>>> {
        (0..batch.len()).map(|i| self.logits(store, &batch.token_ids[i], &batch.segment_ids[i])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Qbert,
    QclsEnd2End,
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qbert" | "qcls-transformer" => Ok(Arch::Qbert),
            "qcls-end2end" => Ok(Arch::QclsEnd2End),
            _ => Err(Error::Config(format!("unknown architecture `{s}` (qbert, qcls-transformer, qcls-end2end)"))),
        }
    }
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Qbert => "qbert",
            Arch::QclsEnd2End => "qcls-end2end",
        }
    }
}

/// A classifier of either architecture.
#[derive(Debug, Clone)]
pub enum AnyClassifier {
    Qbert(QBert),
    End2End(QclsEnd2End),
}

impl AnyClassifier {
    /// Registers a fine-tuning model of `arch` in an empty store.
    pub fn build(arch: Arch, config: ModelConfig, store: &mut ParamStore) -> Result<Self> {
        Ok(match arch {
            Arch::Qbert => AnyClassifier::Qbert(QBert::new(config, Mode::Finetune, store)?),
            Arch::QclsEnd2End => AnyClassifier::End2End(QclsEnd2End::new(config, store)?),
        })
    }

    /// Fresh store with weights drawn from `config.seed`.
    pub fn initialized(arch: Arch, config: ModelConfig) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let model = Self::build(arch, config, &mut store)?;
        let cfg = model.config();
        init_weights(&mut store, cfg.init, cfg.init_std, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
        Ok((model, store))
    }

    pub fn arch(&self) -> Arch {
        match self {
            AnyClassifier::Qbert(_) => Arch::Qbert,
            AnyClassifier::End2End(_) => Arch::QclsEnd2End,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyClassifier::Qbert(m) => &m.config,
            AnyClassifier::End2End(m) => &m.config,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            AnyClassifier::Qbert(m) => m,
            AnyClassifier::End2End(m) => m,
        }
    }
}

impl Classifier for AnyClassifier {
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn logits(&self, store: &ParamStore, tokens: &[usize], segments: &[usize]) -> Result<Vec<f64>> {
        self.inner().logits(store, tokens, segments)
    }

    fn finetune_grads(&self, store: &mut ParamStore, batch: &FinetuneBatch, training: bool, rng: &mut dyn RngCore) -> Result<ClassifyOutput> {
        self.inner().finetune_grads(store, batch, training, rng)
    }

    fn predict(&self, store: &ParamStore, batch: &FinetuneBatch) -> Result<Vec<Vec<f64>>> {
        self.inner().predict(store, batch)
    }
}

/// Copies every parameter of `from` whose name also exists in `to`.
/// Returns the copied names; a shape mismatch is an error.
pub fn transfer_params(from: &ParamStore, to: &mut ParamStore) -> Result<Vec<String>> {
    let mut copied = Vec::new();
    let ids: Vec<_> = to.ids().collect();
    for id in ids {
        let name = to.get(id).name.clone();
        if let Some(src) = from.by_name(&name) {
            if src.value.shape() != to.value(id).shape() {
                return Err(Error::Shape(format!("`{name}`: {:?} vs {:?}", src.value.shape(), to.value(id).shape())));
            }
            *to.value_mut(id) = src.value.clone();
            copied.push(name);
        }
    }
    Ok(copied)
}
