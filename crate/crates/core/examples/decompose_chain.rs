//! Fit a sub-trajectory model on a fixed batch of corridor episodes and
//! print the per-step rewards it assigns to one successful episode.

use diaster::decomposition::{step_targets, SegmentScorer};
use diaster::env::roster::{chain, RIGHT};
use diaster::env::PairEncoder;
use diaster::harness::{collect_biased, fit_frozen, FitConfig};

fn main() -> anyhow::Result<()> {
    let mut env = chain(8, 8, None)?;
    let train = collect_biased(&mut env, 200, RIGHT, 0.75, 1)?;
    let heldout = collect_biased(&mut env, 200, RIGHT, 0.75, 2)?;
    let cfg = FitConfig {
        max_steps: 2000,
        ..FitConfig::default()
    };
    let (psi, report) = fit_frozen(PairEncoder::new(8, 2), &train, &heldout, &cfg)?;
    println!(
        "loss {:.2e} after {} steps, held-out mean |error| {:.3}",
        report.final_loss, report.steps, report.heldout_error
    );

    let success = heldout
        .iter()
        .find(|t| t.episodic_return > 0.0)
        .expect("a biased walk reaches the end");
    let pairs = success.pairs();
    println!("episode of {} steps, return {}", pairs.len(), success.episodic_return);
    for (t, r) in step_targets(&psi, &pairs).iter().enumerate() {
        println!("  t={t} state={} action={} reward {r:+.3}", pairs[t].0, pairs[t].1);
    }
    println!("whole-episode score {:.4}", psi.score(&pairs));
    Ok(())
}
