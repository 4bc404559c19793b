//! CAdamW against RAdamW on a consistent complex least-squares system.

use ::qbert::optim::{compare_optimizers, AdamWConfig, LeastSquares};

fn main() -> ::qbert::Result<()> {
    let cfg = AdamWConfig { alpha: 0.1, ..AdamWConfig::default() };
    for seed in 0..3 {
        let problem = LeastSquares::random_consistent(32, 64, seed);
        let c = compare_optimizers(&problem, 2000, &cfg)?;
        for step in [10, 100, 500, 2000] {
            println!("seed {seed} step {step:>4}: cadamw {:.3e}  radamw {:.3e}", c.cadamw[step - 1], c.radamw[step - 1]);
        }
    }
    Ok(())
}
