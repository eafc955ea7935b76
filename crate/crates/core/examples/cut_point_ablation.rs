//! Number of cut points on the key-door grid: none, one, a few and all.

use std::path::Path;

use diaster::harness::{load_config, mean_and_stderr, run_seed};

fn main() -> anyhow::Result<()> {
    let episodes: usize = std::env::args().nth(1).map_or(Ok(1000), |a| a.parse())?;
    let base = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/key_door_diaster.toml"))?;
    let horizon = base.build_env()?.oracle_mdp().horizon();
    let scratch = tempfile::tempdir()?;
    for m in [0, 1, 5, horizon - 1] {
        let mut cfg = base.clone();
        cfg.method_params.cut_points = m;
        cfg.run.n_episodes = episodes;
        let finals = [0u64, 1, 2]
            .iter()
            .map(|&seed| Ok(run_seed(&cfg, seed, &scratch.path().join(format!("m{m}_{seed}")))?.final_return))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        let (mean, se) = mean_and_stderr(&finals).expect("three seeds");
        println!("m={m:<3} final {mean:.2} +- {se:.2}");
    }
    Ok(())
}
