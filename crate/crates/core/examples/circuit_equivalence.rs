//! The measurement head evaluated classically and as a simulated circuit,
//! exactly and with finite shots.

use ::qbert::qsim::{equivalence_harness, HarnessConfig};

fn main() -> ::qbert::Result<()> {
    for shots in [10_000, 100_000, 1_000_000] {
        let report = equivalence_harness(&HarnessConfig { shots, ..HarnessConfig::default() }, None)?;
        println!("shots {shots:>8}: mse analytic {:.2e}  sampled {:.2e}", report.mse_analytic, report.mse_sampled);
    }
    Ok(())
}
