//! Finite-difference checks of every trained loss on random small inputs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::cuts::CutPointPlan;
use crate::decomposition::losses::{
    batch_prefix_regression, batch_return_loss, batch_rrd_loss, batch_step_loss, multicut_bounds, step_targets,
};
use crate::decomposition::step::StepRewardModel;
use crate::decomposition::subtraj::SubTrajRewardModel;
use crate::env::trajectory::{PairEncoder, Trajectory};
use crate::error::Result;
use crate::nn::gradcheck::grad_check;
use crate::nn::param::{flatten_grads, Module};
use crate::rl::agent::Transition;
use crate::rl::dqn::NeuralQAgent;
use crate::rl::eval::derive_seed;

pub const GRAD_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Multi-cut return loss of the sub-trajectory model.
    DiasterReturn,
    /// Step loss of the Markovian model against detached targets.
    DiasterStep,
    Rrd,
    RudderLite,
    Td,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::DiasterReturn,
        LossKind::DiasterStep,
        LossKind::Rrd,
        LossKind::RudderLite,
        LossKind::Td,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::DiasterReturn => "diaster_return",
            LossKind::DiasterStep => "diaster_step",
            LossKind::Rrd => "rrd",
            LossKind::RudderLite => "rudder_lite",
            LossKind::Td => "td",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradRecord {
    pub loss: LossKind,
    pub seed: u64,
    pub n_params: usize,
    pub max_rel_error: f64,
    /// Analytic and finite-difference values at the worst coordinate.
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub pass: bool,
}

const N_STATES: usize = 5;
const N_ACTIONS: usize = 3;

fn random_trajectories(rng: &mut ChaCha8Rng, n: usize) -> Vec<Trajectory> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(2..=6);
            let states = (0..=len).map(|_| rng.gen_range(0..N_STATES)).collect();
            let actions = (0..len).map(|_| rng.gen_range(0..N_ACTIONS)).collect();
            Trajectory::new(states, actions, rng.gen_range(-2.0..2.0)).expect("consistent lengths")
        })
        .collect()
}

/// Largest relative error of one loss at one seed.
pub fn check_loss(kind: LossKind, seed: u64) -> Result<GradRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x67ad));
    let enc = PairEncoder::new(N_STATES, N_ACTIONS);
    let trajs = random_trajectories(&mut rng, 3);
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let (n_params, check) = match kind {
        LossKind::DiasterReturn => {
            let psi = SubTrajRewardModel::new("psi", enc, 5, &mut rng);
            let plan = CutPointPlan { m: 2, include_zero: false };
            let batch: Vec<(&Trajectory, Vec<usize>)> = refs
                .iter()
                .map(|t| {
                    let cuts = plan.sample(t.len(), &mut rng);
                    (*t, multicut_bounds(t.len(), &cuts).expect("sampled cuts are valid"))
                })
                .collect();
            let f = |p: &[f64]| {
                let mut m = psi.clone();
                m.set_flat_params(p);
                let (l, g) = batch_return_loss(&m, &batch)?;
                Ok((l, flatten_grads(&g)))
            };
            (psi.num_params(), grad_check(f, &psi.flat_params(), FD_STEP)?)
        }
        LossKind::DiasterStep => {
            let psi = SubTrajRewardModel::new("psi", enc, 5, &mut rng);
            let phi = StepRewardModel::new("phi", enc, &[6, 5], true, 6, &mut rng);
            let mut items = Vec::new();
            for t in &refs {
                let pairs = t.pairs();
                for (i, target) in step_targets(&psi, &pairs).into_iter().enumerate() {
                    items.push((pairs[i], i, target));
                }
            }
            let f = |p: &[f64]| {
                let mut m = phi.clone();
                m.set_flat_params(p);
                let (l, g) = batch_step_loss(&m, &items)?;
                Ok((l, flatten_grads(&g)))
            };
            (phi.num_params(), grad_check(f, &phi.flat_params(), FD_STEP)?)
        }
        LossKind::Rrd => {
            let phi = StepRewardModel::new("phi", enc, &[6, 5], false, 6, &mut rng);
            let batch: Vec<(&Trajectory, Vec<usize>)> = refs
                .iter()
                .map(|t| {
                    let k = 2.min(t.len());
                    let mut idx = sample(&mut rng, t.len(), k).into_vec();
                    idx.sort_unstable();
                    (*t, idx)
                })
                .collect();
            let f = |p: &[f64]| {
                let mut m = phi.clone();
                m.set_flat_params(p);
                let (l, g) = batch_rrd_loss(&m, &batch)?;
                Ok((l, flatten_grads(&g)))
            };
            (phi.num_params(), grad_check(f, &phi.flat_params(), FD_STEP)?)
        }
        LossKind::RudderLite => {
            let g_model = SubTrajRewardModel::new("g", enc, 5, &mut rng);
            let f = |p: &[f64]| {
                let mut m = g_model.clone();
                m.set_flat_params(p);
                let (l, g) = batch_prefix_regression(&m, &refs)?;
                Ok((l, flatten_grads(&g)))
            };
            (g_model.num_params(), grad_check(f, &g_model.flat_params(), FD_STEP)?)
        }
        LossKind::Td => {
            let agent = NeuralQAgent::new(N_STATES, N_ACTIONS, &[6, 5], 1e-3, 0.9, 0.01, &mut rng)?;
            // Perturb the target so that it differs from the online network.
            let mut target = agent.target.flat_params();
            target.iter_mut().for_each(|x| *x += rng.gen_range(-0.1..0.1));
            let mut agent = agent;
            agent.target.set_flat_params(&target);
            let batch: Vec<Transition> = (0..8)
                .map(|_| Transition {
                    state: rng.gen_range(0..N_STATES),
                    action: rng.gen_range(0..N_ACTIONS),
                    reward: rng.gen_range(-1.0..1.0),
                    next_state: rng.gen_range(0..N_STATES),
                    done: rng.gen_bool(0.25),
                })
                .collect();
            let f = |p: &[f64]| {
                let mut a = agent.clone();
                a.online.set_flat_params(p);
                let (l, g) = a.td_loss(&batch)?;
                Ok((l, flatten_grads(&g)))
            };
            (agent.online.num_params(), grad_check(f, &agent.online.flat_params(), FD_STEP)?)
        }
    };
    Ok(GradRecord {
        loss: kind,
        seed,
        n_params,
        max_rel_error: check.max_rel_error,
        worst_analytic: check.analytic,
        worst_numeric: check.numeric,
        pass: check.max_rel_error < GRAD_TOL,
    })
}

/// Every loss at seeds `0..n_seeds`.
pub fn gradient_suite(n_seeds: u64) -> Result<Vec<GradRecord>> {
    let mut out = Vec::new();
    for kind in LossKind::ALL {
        for seed in 0..n_seeds {
            out.push(check_loss(kind, seed)?);
        }
    }
    Ok(out)
}

/// Worst error per loss, in [`LossKind::ALL`] order.
pub fn worst_per_loss(records: &[GradRecord]) -> Vec<(LossKind, f64)> {
    LossKind::ALL
        .iter()
        .filter_map(|&k| {
            records
                .iter()
                .filter(|r| r.loss == k)
                .map(|r| r.max_rel_error)
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
                .map(|w| (k, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_loss_passes_on_two_seeds() {
        let recs = gradient_suite(2).unwrap();
        assert_eq!(recs.len(), 10);
        for r in &recs {
            assert!(r.pass && r.n_params > 0, "{r:?}");
        }
        assert_eq!(worst_per_loss(&recs).len(), 5);
    }
}
