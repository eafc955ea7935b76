use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::instance::EpisodicEnv;
use crate::error::{Error, Result};
use crate::rl::agent::Agent;

/// Episodes per evaluation when nothing else is configured.
pub const DEFAULT_EVAL_EPISODES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

/// SplitMix64 finaliser; turns `(seed, index)` into an independent seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean true episodic return of `act` over `n_episodes` rollouts. Episode
/// `i` resets the environment with a seed derived from `(seed, i)` and gives
/// `act` its own generator.
pub fn evaluate_policy<E, F>(env: &mut E, mut act: F, n_episodes: usize, seed: u64) -> Result<EvalResult>
where
    E: EpisodicEnv + ?Sized,
    F: FnMut(usize, &mut ChaCha8Rng) -> usize,
{
    if n_episodes == 0 {
        return Err(Error::invalid("evaluation needs at least one episode"));
    }
    let mut returns = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let episode_seed = derive_seed(seed, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, 0));
        let mut s = env.reset(episode_seed);
        loop {
            let step = env.step(act(s, &mut rng))?;
            s = step.state;
            if step.done {
                break;
            }
        }
        returns.push(env.finish_episode()?);
    }
    Ok(EvalResult {
        mean_return: returns.iter().sum::<f64>() / n_episodes as f64,
        returns,
    })
}

/// Greedy rollouts of `agent`.
pub fn evaluate_greedy<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    agent: &dyn Agent,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalResult> {
    evaluate_policy(env, |s, _| agent.greedy(s), n_episodes, seed)
}
