//! Relabeling with the Markovian step model versus prefix differences of
//! the sub-trajectory model directly.

use std::path::Path;

use diaster::decomposition::MethodTag;
use diaster::harness::{load_config, run_seed};

fn main() -> anyhow::Result<()> {
    let episodes: usize = std::env::args().nth(1).map_or(Ok(1000), |a| a.parse())?;
    let base = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/key_door_diaster.toml"))?;
    let scratch = tempfile::tempdir()?;
    for method in [MethodTag::Diaster, MethodTag::DiasterNoStep] {
        let mut cfg = base.clone();
        cfg.method = method;
        cfg.run.n_episodes = episodes;
        for seed in 0..3 {
            let stats = run_seed(&cfg, seed, &scratch.path().join(format!("{method}_{seed}")))?;
            println!(
                "{:<16} seed {seed}: final {:.2}, best smoothed {:.2}",
                method.as_str(),
                stats.final_return,
                stats.best_smoothed_return
            );
        }
    }
    Ok(())
}
