//! A small grid over cut points and learning rate, written to disk and
//! summarized across seeds.

use std::path::Path;

use diaster::harness::{load_config, run_sweep, summarize_dir, Variation, OUTPUT_ROOT_ENV};

fn main() -> anyhow::Result<()> {
    let mut cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/chain_diaster.toml"))?;
    cfg.run.n_episodes = 300;
    cfg.run.seeds = vec![0, 1, 2];
    let scratch = tempfile::tempdir()?;
    cfg.run.output_dir = scratch.path().to_path_buf();
    if std::env::var_os(OUTPUT_ROOT_ENV).is_some() {
        eprintln!("{OUTPUT_ROOT_ENV} is set; runs go there instead of a scratch directory");
    }
    let vary: Vec<Variation> = vec!["m=0,1,3".parse()?, "method_params.psi_lr=0.001,0.003".parse()?];
    let runs = run_sweep(&cfg, &vary)?;
    let root = runs[0].1.dir.parent().expect("sweep directory").to_path_buf();
    let summary = summarize_dir(&root)?;
    for line in std::fs::read_to_string(summary)?.lines().filter(|l| l.starts_with("group") || l.contains("\tfinal\t")) {
        println!("{line}");
    }
    Ok(())
}
