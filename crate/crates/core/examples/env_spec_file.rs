//! Load an environment file, report its size and optimal return, and walk
//! one hand-written episode.

use std::path::Path;

use diaster::env::roster::{DOWN, EAST, UP};
use diaster::env::{EnvSpec, EpisodicEnv};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/envs/key_door_5x5.toml");
    let spec = EnvSpec::load(&path)?;
    let mut env = spec.build()?;
    let mdp = env.oracle_mdp().clone();
    println!(
        "{}: {} states, {} actions, horizon {}, optimal return {}",
        env.name(),
        mdp.n_states(),
        mdp.n_actions(),
        mdp.horizon(),
        mdp.optimal_return()
    );
    env.reset(0);
    // Fetch the key, then shuttle between door and key.
    let mut plan = vec![EAST; 4];
    while plan.len() < mdp.horizon() {
        plan.extend([DOWN; 4]);
        plan.extend([UP; 4]);
    }
    for a in plan {
        if env.step(a)?.done {
            break;
        }
    }
    println!("hand-written episode return {}", env.finish_episode()?);
    Ok(())
}
