//! Finite-difference check of every trained loss.

use diaster::harness::{gradient_suite, worst_per_loss, GRAD_TOL};

fn main() -> anyhow::Result<()> {
    let recs = gradient_suite(5)?;
    for (kind, worst) in worst_per_loss(&recs) {
        println!("{:<15} {worst:.2e} (tolerance {GRAD_TOL:.0e})", kind.as_str());
    }
    Ok(())
}
