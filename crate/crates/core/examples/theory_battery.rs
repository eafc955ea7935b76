//! Exact-expectation checks on a handful of random instances, with the
//! shipped negative controls.

use diaster::theory::{negative_controls, run_battery, BatteryConfig};

fn main() -> anyhow::Result<()> {
    let cfg = BatteryConfig {
        instances: 20,
        ..BatteryConfig::default()
    };
    let report = run_battery(&cfg)?;
    for s in report.summary() {
        println!("{:<24} {:>5}/{:<5} max gap {:.2e}", s.tag, s.passed, s.checks, s.max_gap);
    }
    if let Some(worst) = report
        .failures()
        .max_by(|a, b| a.gap.total_cmp(&b.gap))
    {
        println!(
            "largest failure: {} on instance {} ({}), lhs {:.4} rhs {:.4}",
            worst.tag, worst.instance, worst.note.as_deref().unwrap_or("-"), worst.lhs, worst.rhs
        );
    }
    for c in negative_controls(cfg.tol)? {
        println!("control {:<22} flagged {} (gap {:.2e})", c.tag, !c.pass, c.gap);
    }
    Ok(())
}
