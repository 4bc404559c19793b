//! Masked-LM and next-sentence pretraining on a small generated corpus.

use ::qbert::data::{synthetic_corpus, PretrainSampler, Vocab};
use ::qbert::models::{Mode, ModelConfig, QBert};
use ::qbert::train::{pretrain, TrainConfig};

fn main() -> ::qbert::Result<()> {
    let lines = synthetic_corpus(200, 0);
    let vocab = Vocab::build(lines.iter().map(String::as_str), 2, 512)?;
    let cfg = ModelConfig { vocab_size: vocab.len(), ..ModelConfig::default() };
    let (model, mut store) = QBert::initialized(cfg.clone(), Mode::Pretrain)?;
    let mut sampler = PretrainSampler::new(lines.iter().map(String::as_str), &vocab, cfg.max_seq_len)?;
    let train = TrainConfig { pretrain_lr: 3e-3, pretrain_steps: 500, log_every: 0, ..TrainConfig::default() };

    let records = pretrain(&model, &mut store, &mut sampler, &train, 0)?;
    println!("ln V = {:.3}, ln 2 = {:.3}", (vocab.len() as f64).ln(), 2f64.ln());
    for r in records.iter().filter(|r| r.step == 1 || r.step % 100 == 0) {
        println!("step {:>3}: mlm {:.3}  nsp {:.3}", r.step, r.loss_mlm, r.loss_nsp);
    }
    Ok(())
}
