//! Finite-difference check of every layer at small widths.

use ::qbert::gradsuite::run_suite;
use ::qbert::models::ModelConfig;

fn main() -> ::qbert::Result<()> {
    let cfg = ModelConfig {
        d_model: 8,
        d_hidden: 6,
        n_heads: 2,
        ..ModelConfig::default()
    };
    for r in run_suite(&cfg, None, &[0])? {
        println!("{:<26} {:.2e}  {}", r.name, r.report.max_error(), if r.passed() { "ok" } else { "FAIL" });
    }
    Ok(())
}
