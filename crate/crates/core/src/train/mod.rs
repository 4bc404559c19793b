//! Training loops, metrics and their CSV logs.

mod metrics;

pub use metrics::{argmax, classification_metrics, Metrics};

use std::fmt::Write as _;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::data::{FinetuneBatch, PretrainSampler};
use crate::error::{at_path, Error, Result};
use crate::models::{Classifier, QBert};
use crate::optim::{AdamW, AdamWConfig, OptimizerKind, Schedule};

/// Training hyperparameters. Every field is a config-file key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub pretrain_lr: f64,
    pub pretrain_batch: usize,
    pub pretrain_steps: u64,
    pub finetune_lr: f64,
    pub finetune_batch: usize,
    pub epochs: usize,
    /// Linear warm-up length; 0 keeps the learning rate constant.
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global cotangent norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub vocab_min_freq: usize,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::CAdamW,
            pretrain_lr: 1e-4,
            pretrain_batch: 32,
            pretrain_steps: 1000,
            finetune_lr: 1e-3,
            finetune_batch: 128,
            epochs: 50,
            warmup_steps: 0,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 0.0,
            vocab_min_freq: 2,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn adamw(&self, lr: f64, total_steps: u64) -> Result<AdamWConfig> {
        let cfg = AdamWConfig {
            alpha: lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
            schedule: if self.warmup_steps > 0 {
                Schedule::LinearWarmupDecay {
                    warmup_steps: self.warmup_steps,
                    total_steps,
                }
            } else {
                Schedule::Constant(1.0)
            },
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pretrain_batch == 0 || self.finetune_batch == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if self.clip_norm < 0.0 {
            return Err(Error::Config(format!("clip_norm must be non-negative, got {}", self.clip_norm)));
        }
        self.adamw(self.pretrain_lr, self.pretrain_steps)?;
        self.adamw(self.finetune_lr, 1).map(|_| ())
    }
}

/// Independent RNG streams derived from one seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const STREAM_DATA: u64 = 1;
pub const STREAM_DROPOUT: u64 = 2;
pub const STREAM_SHUFFLE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainRecord {
    pub step: u64,
    pub loss_mlm: f64,
    pub loss_nsp: f64,
    pub loss_total: f64,
}

/// Runs `steps` optimizer steps of MLM + NSP (+ regularizer) training.
/// Batches and dropout masks come from `seed`-derived streams.
pub fn pretrain(model: &QBert, store: &mut ParamStore, sampler: &mut PretrainSampler, cfg: &TrainConfig, seed: u64) -> Result<Vec<PretrainRecord>> {
    let mut opt = AdamW::new(cfg.adamw(cfg.pretrain_lr, cfg.pretrain_steps)?, cfg.optimizer)?;
    let mut data_rng = rng_stream(seed, STREAM_DATA);
    let mut drop_rng = rng_stream(seed, STREAM_DROPOUT);
    let mut records = Vec::with_capacity(cfg.pretrain_steps as usize);
    for step in 1..=cfg.pretrain_steps {
        let batch = sampler.batch(cfg.pretrain_batch, &mut data_rng);
        store.zero_grads();
        let l = model.pretrain_grads(store, &batch, true, &mut drop_rng)?;
        opt.step(store)?;
        let rec = PretrainRecord {
            step,
            loss_mlm: l.mlm,
            loss_nsp: l.nsp,
            loss_total: l.total(),
        };
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step == 1) {
            info!("step {step}: mlm {:.4} nsp {:.4} total {:.4}", rec.loss_mlm, rec.loss_nsp, rec.loss_total);
        }
        records.push(rec);
    }
    if sampler.truncated() > 0 {
        info!("{} sentence pairs were truncated to max_seq_len", sampler.truncated());
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub metrics: Metrics,
    pub predictions: Vec<usize>,
}

/// Inference-mode loss and metrics on a labeled batch.
pub fn evaluate(model: &dyn Classifier, store: &ParamStore, data: &FinetuneBatch) -> Result<Evaluation> {
    data.check_labels(model.n_classes())?;
    let logits = model.predict(store, data)?;
    let n = logits.len().max(1) as f64;
    let loss = logits
        .iter()
        .zip(&data.class_labels)
        .map(|(l, &y)| crate::layers::heads::softmax_cross_entropy(l, y).0)
        .sum::<f64>()
        / n;
    let predictions: Vec<usize> = logits.iter().map(|l| argmax(l)).collect();
    let metrics = classification_metrics(&predictions, &data.class_labels, model.n_classes());
    Ok(Evaluation { loss, metrics, predictions })
}

/// Mini-batch fine-tuning for `cfg.epochs` epochs; after each epoch the
/// train and dev splits are evaluated.
pub fn finetune(model: &dyn Classifier, store: &mut ParamStore, train: &FinetuneBatch, dev: Option<&FinetuneBatch>, cfg: &TrainConfig, seed: u64) -> Result<Vec<EpochRecord>> {
    if train.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }
    let per_epoch = train.len().div_ceil(cfg.finetune_batch) as u64;
    let mut opt = AdamW::new(cfg.adamw(cfg.finetune_lr, per_epoch * cfg.epochs as u64)?, cfg.optimizer)?;
    let mut shuffle_rng = rng_stream(seed, STREAM_SHUFFLE);
    let mut drop_rng = rng_stream(seed, STREAM_DROPOUT);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.finetune_batch) {
            store.zero_grads();
            model.finetune_grads(store, &train.select(chunk), true, &mut drop_rng)?;
            opt.step(store)?;
        }
        for (split, data) in [("train", Some(train)), ("dev", dev)] {
            let Some(data) = data else { continue };
            let e = evaluate(model, store, data)?;
            records.push(EpochRecord {
                epoch,
                split: split.to_string(),
                loss: e.loss,
                accuracy: e.metrics.accuracy,
            });
        }
        if let Some(r) = records.last() {
            info!("epoch {epoch}: {} loss {:.4} acc {:.4}", r.split, r.loss, r.accuracy);
        }
    }
    Ok(records)
}

pub fn pretrain_csv(records: &[PretrainRecord]) -> String {
    let mut s = String::from("step,loss_mlm,loss_nsp,loss_total\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.step, r.loss_mlm, r.loss_nsp, r.loss_total);
    }
    s
}

pub fn finetune_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,split,loss,accuracy\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.split, r.loss, r.accuracy);
    }
    s
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        at_path(dir, std::fs::create_dir_all(dir))?;
    }
    at_path(path, std::fs::write(path, content))?;
    Ok(())
}
