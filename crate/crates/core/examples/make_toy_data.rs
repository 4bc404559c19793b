//! Writes a toy corpus and labeled splits for trying the command-line tool.
//!
//! `cargo run --example make_toy_data -- data/`

use std::path::PathBuf;

use ::qbert::data::{synthetic_classification, synthetic_corpus, write_tsv};

fn main() -> ::qbert::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("corpus.txt"), synthetic_corpus(200, 0).join("\n") + "\n")?;
    write_tsv(&dir.join("train.tsv"), &synthetic_classification(200, 2, 1))?;
    write_tsv(&dir.join("dev.tsv"), &synthetic_classification(400, 2, 2))?;
    println!("wrote corpus.txt, train.tsv and dev.tsv to {}", dir.display());
    Ok(())
}
