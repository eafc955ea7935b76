//! The exact step-reward oracle for the hidden-reward scorer on a small
//! random environment recovers the hidden reward table wherever a state is
//! reachable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use diaster::decomposition::{AdditiveScorer, ExactOracle};
use diaster::env::{random_mdp, RandomMdpOptions, TabularPolicy};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mdp = random_mdp(4, 2, 4, RandomMdpOptions::default(), &mut rng)?;
    let policy = TabularPolicy::uniform(4, 2);
    let oracle = ExactOracle::build(&mdp, &policy, &AdditiveScorer::hidden_partial_sums(&mdp))?;
    let mut worst: f64 = 0.0;
    for t in 0..mdp.horizon() {
        for s in 0..mdp.n_states() {
            if !oracle.is_defined(s, t) {
                println!("t={t} s={s}: unreachable");
                continue;
            }
            for a in 0..mdp.n_actions() {
                let r = oracle.reward(s, a, t)?;
                worst = worst.max((r - mdp.hidden_reward(s, a)).abs());
                println!("t={t} s={s} a={a}: oracle {r:+.4} hidden {:+.4}", mdp.hidden_reward(s, a));
            }
        }
    }
    println!("largest deviation {worst:.2e}");
    Ok(())
}
