//! Saves a model, loads it back and compares every parameter bit for bit.

use ::qbert::checkpoint::Checkpoint;
use ::qbert::models::{AnyClassifier, Arch, ModelConfig};

fn main() -> ::qbert::Result<()> {
    let cfg = ModelConfig { vocab_size: 40, ..ModelConfig::default() };
    let (_, store) = AnyClassifier::initialized(Arch::Qbert, cfg.clone())?;
    let vocab = ::qbert::data::Vocab::build(["a b c"], 1, 40)?;
    let ckpt = Checkpoint::from_store(&store, &cfg, "qbert", "finetune", 0, vocab.tokens().to_vec());

    let path = std::env::temp_dir().join("qbert-example.ckpt");
    ckpt.save(&path)?;
    let back = Checkpoint::load(&path)?;
    let identical = ckpt.params.iter().zip(&back.params).all(|((a, x), (b, y))| {
        a == b && x.shape() == y.shape() && x.data().iter().zip(y.data()).all(|(u, v)| u.re.to_bits() == v.re.to_bits() && u.im.to_bits() == v.im.to_bits())
    });
    println!("{} tensors, {} bytes, bitwise identical: {identical}", back.params.len(), std::fs::metadata(&path)?.len());
    std::fs::remove_file(&path)?;
    Ok(())
}
