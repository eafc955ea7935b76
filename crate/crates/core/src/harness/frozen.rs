//! Fitting the sub-trajectory model on a fixed set of episodes, with no
//! agent in the loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::cuts::CutPointPlan;
use crate::decomposition::losses::{batch_return_loss, return_loss};
use crate::decomposition::scorer::SegmentScorer;
use crate::decomposition::subtraj::SubTrajRewardModel;
use crate::env::instance::{EnvInstance, EpisodicEnv};
use crate::env::trajectory::{PairEncoder, Trajectory};
use crate::error::{Error, Result};
use crate::nn::adam::Adam;
use crate::nn::param::Module;
use crate::rl::eval::derive_seed;

/// Episodes from a behavior policy that takes `preferred` with probability
/// `bias` and a uniform action otherwise.
pub fn collect_biased(env: &mut EnvInstance, n: usize, preferred: usize, bias: f64, seed: u64) -> Result<Vec<Trajectory>> {
    if preferred >= env.n_actions() || !(0.0..=1.0).contains(&bias) {
        return Err(Error::invalid("preferred action out of range or bias outside [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        env.reset(derive_seed(seed, i as u64));
        loop {
            let a = if rng.gen_bool(bias) {
                preferred
            } else {
                rng.gen_range(0..env.n_actions())
            };
            if env.step(a)?.done {
                break;
            }
        }
        env.finish_episode()?;
        out.push(env.trajectory()?);
    }
    Ok(out)
}

/// Two-segment loss averaged over every interior cut of every episode; an
/// episode of length 1 contributes its whole-episode residual.
pub fn exhaustive_loss<S: SegmentScorer>(psi: &S, trajs: &[Trajectory]) -> Result<f64> {
    let mut total = 0.0;
    for t in trajs {
        let per = if t.len() < 2 {
            return_loss(psi, t, t.len())?
        } else {
            let mut s = 0.0;
            for c in 1..t.len() {
                s += return_loss(psi, t, c)?;
            }
            s / (t.len() - 1) as f64
        };
        total += per;
    }
    Ok(total / trajs.len().max(1) as f64)
}

/// Mean `|R(tau_0:T) - R_ep|` of the whole-episode score.
pub fn mean_return_error<S: SegmentScorer>(psi: &S, trajs: &[Trajectory]) -> f64 {
    let sum: f64 = trajs
        .iter()
        .map(|t| (psi.score(&t.pairs()) - t.episodic_return).abs())
        .sum();
    sum / trajs.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_steps: usize,
    /// Episodes per optimizer step.
    pub batch: usize,
    pub lr: f64,
    pub hidden: usize,
    pub cut_points: usize,
    /// Steps between full-buffer loss evaluations.
    pub check_every: usize,
    /// Loss level whose first crossing is reported.
    pub target_loss: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_steps: 5000,
            batch: 32,
            lr: 3e-3,
            hidden: 16,
            cut_points: 1,
            check_every: 100,
            target_loss: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// First check at which the loss was below target.
    pub reached_at: Option<usize>,
    pub steps: usize,
    /// `(step, exhaustive loss)` at every check.
    pub curve: Vec<(usize, f64)>,
    pub final_loss: f64,
    pub heldout_error: f64,
}

/// Train a fresh model on `train` for the whole step budget, then score
/// `heldout`.
pub fn fit_frozen(
    encoder: PairEncoder,
    train: &[Trajectory],
    heldout: &[Trajectory],
    cfg: &FitConfig,
) -> Result<(SubTrajRewardModel, FitReport)> {
    if train.is_empty() || cfg.batch == 0 || cfg.check_every == 0 {
        return Err(Error::invalid("need episodes, a positive batch and a positive check interval"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut psi = SubTrajRewardModel::new("psi", encoder, cfg.hidden, &mut rng);
    let mut opt = Adam::new(cfg.lr);
    let plan = CutPointPlan {
        m: cfg.cut_points,
        include_zero: false,
    };
    let mut curve = Vec::new();
    let mut reached_at = None;
    let mut steps = 0;
    while steps < cfg.max_steps {
        let batch: Vec<(&Trajectory, Vec<usize>)> = train
            .choose_multiple(&mut rng, cfg.batch.min(train.len()))
            .map(|t| {
                let mut bounds = vec![0];
                bounds.extend(plan.sample(t.len(), &mut rng));
                bounds.push(t.len());
                (t, bounds)
            })
            .collect();
        let (_, grads) = batch_return_loss(&psi, &batch)?;
        opt.step(&mut psi.params_mut(), &grads)?;
        steps += 1;
        if steps % cfg.check_every == 0 || steps == cfg.max_steps {
            let loss = exhaustive_loss(&psi, train)?;
            curve.push((steps, loss));
            if loss < cfg.target_loss && reached_at.is_none() {
                reached_at = Some(steps);
            }
        }
    }
    let final_loss = curve.last().map_or(f64::NAN, |c| c.1);
    let heldout_error = mean_return_error(&psi, heldout);
    Ok((
        psi,
        FitReport {
            reached_at,
            steps,
            curve,
            final_loss,
            heldout_error,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::scorer::AdditiveScorer;
    use crate::env::roster::{chain, RIGHT};

    #[test]
    fn biased_collection_respects_the_horizon() {
        let mut env = chain(4, 5, None).unwrap();
        let trajs = collect_biased(&mut env, 20, RIGHT, 1.0, 3).unwrap();
        for t in &trajs {
            assert_eq!(t.len(), 3);
            assert_eq!(t.episodic_return, 1.0);
            assert!(t.terminated);
        }
        assert!(collect_biased(&mut env, 1, 7, 0.5, 0).is_err());
    }

    #[test]
    fn exact_scorer_has_zero_loss() {
        let mut env = chain(4, 6, None).unwrap();
        let trajs = collect_biased(&mut env, 30, RIGHT, 0.5, 1).unwrap();
        let exact = AdditiveScorer::hidden_partial_sums(env.oracle_mdp());
        assert_eq!(exhaustive_loss(&exact, &trajs).unwrap(), 0.0);
        assert_eq!(mean_return_error(&exact, &trajs), 0.0);
    }
}
