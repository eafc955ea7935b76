//! Every redistribution method on the key-door grid with a short budget.
//! Pass an episode count to change the budget.

use std::path::Path;

use diaster::decomposition::MethodTag;
use diaster::harness::{load_config, mean_and_stderr, run_seed};

fn main() -> anyhow::Result<()> {
    let episodes: usize = std::env::args().nth(1).map_or(Ok(500), |a| a.parse())?;
    let base = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/key_door_diaster.toml"))?;
    let scratch = tempfile::tempdir()?;
    for method in MethodTag::ALL {
        let mut cfg = base.clone();
        cfg.method = method;
        cfg.run.n_episodes = episodes;
        let mut finals = Vec::new();
        for &seed in &[0, 1, 2] {
            let dir = scratch.path().join(method.as_str()).join(seed.to_string());
            finals.push(run_seed(&cfg, seed, &dir)?.final_return);
        }
        let (m, se) = mean_and_stderr(&finals).expect("three seeds");
        println!("{:<16} final {m:.2} +- {se:.2} {finals:?}", method.as_str());
    }
    Ok(())
}
