//! Pretrained QBERT against a freshly initialized encoder and the
//! bag-of-words classifier on a small labeled set.

use ::qbert::data::{synthetic_classification, synthetic_corpus, FinetuneBatch, PretrainSampler, Vocab};
use ::qbert::models::{transfer_params, AnyClassifier, Arch, Mode, ModelConfig, QBert};
use ::qbert::train::{finetune, pretrain, TrainConfig};

fn main() -> ::qbert::Result<()> {
    let lines = synthetic_corpus(200, 0);
    let vocab = Vocab::build(lines.iter().map(String::as_str), 2, 512)?;
    let cfg = ModelConfig { vocab_size: vocab.len(), ..ModelConfig::default() };
    let train_cfg = TrainConfig {
        pretrain_lr: 3e-3,
        pretrain_steps: 500,
        finetune_batch: 32,
        epochs: 20,
        log_every: 0,
        ..TrainConfig::default()
    };

    let (pre, mut pre_store) = QBert::initialized(cfg.clone(), Mode::Pretrain)?;
    let mut sampler = PretrainSampler::new(lines.iter().map(String::as_str), &vocab, cfg.max_seq_len)?;
    pretrain(&pre, &mut pre_store, &mut sampler, &train_cfg, 0)?;

    let train = FinetuneBatch::encode(&synthetic_classification(64, 2, 100), &vocab, cfg.max_seq_len);
    let dev = FinetuneBatch::encode(&synthetic_classification(400, 2, 200), &vocab, cfg.max_seq_len);
    for (name, arch, pretrained) in [
        ("qbert", Arch::Qbert, true),
        ("qcls-transformer", Arch::Qbert, false),
        ("qcls-end2end", Arch::QclsEnd2End, false),
    ] {
        let (model, mut store) = AnyClassifier::initialized(arch, cfg.clone())?;
        if pretrained {
            transfer_params(&pre_store, &mut store)?;
        }
        let records = finetune(&model, &mut store, &train, Some(&dev), &train_cfg, 0)?;
        let last = records.last().expect("at least one epoch");
        println!("{name:<17} dev accuracy {:.3}", last.accuracy);
    }
    Ok(())
}
