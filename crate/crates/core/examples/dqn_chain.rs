//! Neural Q-learning on the corridor with redistributed rewards.

use diaster::decomposition::MethodTag;
use diaster::env::EnvSpec;
use diaster::harness::{run_seed, ExperimentConfig};
use diaster::rl::AgentKind;

fn main() -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::new(
        MethodTag::Diaster,
        EnvSpec::Chain {
            length: 6,
            horizon: None,
            distractor: Some(0.1),
        },
    );
    cfg.rl.agent = AgentKind::Neural;
    cfg.rl.hidden = vec![32];
    cfg.rl.lr = 1e-3;
    cfg.rl.batch_size = 64;
    cfg.rl.updates_per_episode = 2;
    cfg.method_params.gru_hidden = 8;
    cfg.method_params.step_hidden = vec![16];
    cfg.method_params.trajectory_batch = Some(8);
    cfg.method_params.psi_lr = 3e-3;
    cfg.method_params.phi_lr = 3e-3;
    cfg.run.n_episodes = 600;
    cfg.run.eval_interval = 500;
    let optimal = cfg.build_env()?.oracle_mdp().optimal_return();
    let scratch = tempfile::tempdir()?;
    let stats = run_seed(&cfg, 0, scratch.path())?;
    println!(
        "final {:.2} (optimal {optimal:.2}), best smoothed {:.2}, {} env steps",
        stats.final_return, stats.best_smoothed_return, stats.env_steps
    );
    Ok(())
}
