//! Redistribution methods: every method turns a finished trajectory into
//! per-step proxy rewards through the same interface.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::cuts::CutPointPlan;
use crate::decomposition::losses::{
    batch_prefix_regression, batch_return_loss, batch_rrd_loss, batch_step_loss, step_targets,
};
use crate::decomposition::scorer::SegmentScorer;
use crate::decomposition::step::StepRewardModel;
use crate::decomposition::subtraj::{SubTrajRewardModel, DEFAULT_GRU_HIDDEN};
use crate::env::trajectory::{PairEncoder, Trajectory};
use crate::error::{Error, Result};
use crate::nn::adam::{Adam, DEFAULT_LR};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::dense::DEFAULT_HIDDEN;
use crate::nn::param::Module;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    /// Sub-trajectory model plus Markovian step model.
    Diaster,
    /// Sub-trajectory model only; rewards are raw prefix differences.
    DiasterNoStep,
    /// Recurrent per-prefix return predictor, rewards are consecutive differences.
    RudderLite,
    /// Normalised episodic return on every step.
    Ircr,
    /// Step model fitted on random subsequences.
    Rrd,
    /// Monte-Carlo baseline: the episodic return on the final step, zero elsewhere.
    Episodic,
}

impl MethodTag {
    pub const ALL: [MethodTag; 6] = [
        MethodTag::Diaster,
        MethodTag::DiasterNoStep,
        MethodTag::RudderLite,
        MethodTag::Ircr,
        MethodTag::Rrd,
        MethodTag::Episodic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Diaster => "diaster",
            MethodTag::DiasterNoStep => "diaster_no_step",
            MethodTag::RudderLite => "rudder_lite",
            MethodTag::Ircr => "ircr",
            MethodTag::Rrd => "rrd",
            MethodTag::Episodic => "episodic",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}`")))
    }
}

/// Which steps of a sampled trajectory feed the step-model regression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepSampling {
    /// Every step of every sampled trajectory.
    #[default]
    All,
    /// One uniformly drawn step per sampled trajectory.
    One,
}

/// Value of the return predictor on the empty prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyPrefix {
    #[default]
    Zero,
    /// Read-out of the zero initial hidden state.
    Readout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    /// Number of cut points `m`.
    pub cut_points: usize,
    pub include_zero_cut: bool,
    pub gru_hidden: usize,
    pub state_only: bool,
    pub step_hidden: Vec<usize>,
    pub time_feature: bool,
    pub rrd_k: usize,
    pub psi_lr: f64,
    pub phi_lr: f64,
    /// Trajectories per decomposition batch; the RL batch size when unset.
    pub trajectory_batch: Option<usize>,
    pub step_sampling: StepSampling,
    pub rudder_empty: EmptyPrefix,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            cut_points: 1,
            include_zero_cut: false,
            gru_hidden: DEFAULT_GRU_HIDDEN,
            state_only: false,
            step_hidden: DEFAULT_HIDDEN.to_vec(),
            time_feature: false,
            rrd_k: 4,
            psi_lr: DEFAULT_LR,
            phi_lr: DEFAULT_LR,
            trajectory_batch: None,
            step_sampling: StepSampling::All,
            rudder_empty: EmptyPrefix::Zero,
        }
    }
}

/// Buffer-wide quantities some methods need at relabel time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BufferStats {
    pub n_trajectories: usize,
    /// Smallest and largest return ever stored.
    pub min_return: Option<f64>,
    pub max_return: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub decomposition_loss: Option<f64>,
    pub step_loss: Option<f64>,
}

pub trait Redistribution: Send {
    fn tag(&self) -> MethodTag;

    /// One update on a batch of stored trajectories.
    fn train_batch(&mut self, batch: &[&Trajectory], rng: &mut ChaCha8Rng) -> Result<TrainStats>;

    /// Proxy rewards for every step of `traj`.
    fn relabel(&self, traj: &Trajectory, stats: &BufferStats) -> Vec<f64>;

    /// Proxy reward of a single step. Markovian methods override this to
    /// avoid relabeling the whole trajectory.
    fn relabel_step(&self, traj: &Trajectory, t: usize, stats: &BufferStats) -> f64 {
        self.relabel(traj, stats)[t]
    }

    /// True when `relabel_step` does not depend on the rest of the trajectory.
    fn is_markov(&self) -> bool;

    fn checkpoint(&self, _ck: &mut Checkpoint) {}
}

/// Instantiate a method for an environment with the given sizes.
pub fn build_method(
    tag: MethodTag,
    params: &MethodParams,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Box<dyn Redistribution>> {
    let encoder = PairEncoder {
        n_states,
        n_actions,
        state_only: params.state_only,
    };
    let step_model = |rng: &mut ChaCha8Rng| {
        StepRewardModel::new("phi", encoder, &params.step_hidden, params.time_feature, horizon, rng)
    };
    Ok(match tag {
        MethodTag::Diaster | MethodTag::DiasterNoStep => {
            let plan = CutPointPlan {
                m: params.cut_points,
                include_zero: params.include_zero_cut,
            };
            let psi = SubTrajRewardModel::new("psi", encoder, params.gru_hidden, rng);
            let phi = (tag == MethodTag::Diaster).then(|| step_model(rng));
            Box::new(Diaster {
                psi,
                phi,
                opt_psi: Adam::new(params.psi_lr),
                opt_phi: Adam::new(params.phi_lr),
                plan,
                sampling: params.step_sampling,
            })
        }
        MethodTag::RudderLite => Box::new(RudderLite {
            g: SubTrajRewardModel::new("g", encoder, params.gru_hidden, rng),
            opt: Adam::new(params.psi_lr),
            empty: params.rudder_empty,
        }),
        MethodTag::Ircr => Box::new(Ircr),
        MethodTag::Rrd => {
            if params.rrd_k == 0 {
                return Err(Error::config("method_params.rrd_k", "must be at least 1"));
            }
            Box::new(Rrd {
                phi: step_model(rng),
                opt: Adam::new(params.phi_lr),
                k: params.rrd_k,
            })
        }
        MethodTag::Episodic => Box::new(Episodic),
    })
}

/// Sub-trajectory decomposition with an optional step model.
pub struct Diaster {
    pub psi: SubTrajRewardModel,
    pub phi: Option<StepRewardModel>,
    opt_psi: Adam,
    opt_phi: Adam,
    pub plan: CutPointPlan,
    sampling: StepSampling,
}

impl Diaster {
    pub fn new(psi: SubTrajRewardModel, phi: Option<StepRewardModel>, plan: CutPointPlan, lr: f64) -> Self {
        Self {
            psi,
            phi,
            opt_psi: Adam::new(lr),
            opt_phi: Adam::new(lr),
            plan,
            sampling: StepSampling::All,
        }
    }

    /// Update psi only, returning the batch loss before the step.
    pub fn train_psi(&mut self, batch: &[&Trajectory], rng: &mut ChaCha8Rng) -> Result<f64> {
        let with_bounds: Vec<(&Trajectory, Vec<usize>)> = batch
            .iter()
            .map(|t| {
                let mut bounds = vec![0];
                bounds.extend(self.plan.sample(t.len(), rng));
                bounds.push(t.len());
                (*t, bounds)
            })
            .collect();
        let (loss, grads) = batch_return_loss(&self.psi, &with_bounds)?;
        self.opt_psi.step(&mut self.psi.params_mut(), &grads)?;
        Ok(loss)
    }

    /// Update phi toward the current psi's prefix differences.
    pub fn train_phi(&mut self, batch: &[&Trajectory], rng: &mut ChaCha8Rng) -> Result<Option<f64>> {
        let Some(phi) = self.phi.as_mut() else {
            return Ok(None);
        };
        let mut items = Vec::new();
        for traj in batch {
            if traj.is_empty() {
                continue;
            }
            let pairs = traj.pairs();
            let targets = step_targets(&self.psi, &pairs);
            match self.sampling {
                StepSampling::All => items.extend((0..pairs.len()).map(|t| (pairs[t], t, targets[t]))),
                StepSampling::One => {
                    let t = rng.gen_range(0..pairs.len());
                    items.push((pairs[t], t, targets[t]));
                }
            }
        }
        let (loss, grads) = batch_step_loss(phi, &items)?;
        self.opt_phi.step(&mut phi.params_mut(), &grads)?;
        Ok(Some(loss))
    }
}

impl Redistribution for Diaster {
    fn tag(&self) -> MethodTag {
        if self.phi.is_some() {
            MethodTag::Diaster
        } else {
            MethodTag::DiasterNoStep
        }
    }

    fn train_batch(&mut self, batch: &[&Trajectory], rng: &mut ChaCha8Rng) -> Result<TrainStats> {
        let decomposition_loss = Some(self.train_psi(batch, rng)?);
        let step_loss = self.train_phi(batch, rng)?;
        Ok(TrainStats {
            decomposition_loss,
            step_loss,
        })
    }

    fn relabel(&self, traj: &Trajectory, _stats: &BufferStats) -> Vec<f64> {
        match &self.phi {
            Some(phi) => (0..traj.len()).map(|t| phi.reward(traj.pair(t), t)).collect(),
            None => step_targets(&self.psi, &traj.pairs()),
        }
    }

    fn relabel_step(&self, traj: &Trajectory, t: usize, stats: &BufferStats) -> f64 {
        match &self.phi {
            Some(phi) => phi.reward(traj.pair(t), t),
            None => self.relabel(traj, stats)[t],
        }
    }

    fn is_markov(&self) -> bool {
        self.phi.is_some()
    }

    fn checkpoint(&self, ck: &mut Checkpoint) {
        ck.add_module("psi", &self.psi);
        if let Some(phi) = &self.phi {
            ck.add_module("phi", phi);
        }
    }
}

/// Difference-of-predictions redistribution with a recurrent return predictor.
pub struct RudderLite {
    pub g: SubTrajRewardModel,
    opt: Adam,
    pub empty: EmptyPrefix,
}

impl RudderLite {
    pub fn new(g: SubTrajRewardModel, lr: f64, empty: EmptyPrefix) -> Self {
        Self {
            g,
            opt: Adam::new(lr),
            empty,
        }
    }

    /// Predictions for every prefix length `0..=len`.
    pub fn predictions(&self, traj: &Trajectory) -> Vec<f64> {
        let mut p = self.g.prefix_scores(&traj.pairs());
        if self.empty == EmptyPrefix::Readout {
            p[0] = self.g.readout(&self.g.start());
        }
        p
    }
}

impl Redistribution for RudderLite {
    fn tag(&self) -> MethodTag {
        MethodTag::RudderLite
    }

    fn train_batch(&mut self, batch: &[&Trajectory], _rng: &mut ChaCha8Rng) -> Result<TrainStats> {
        let (loss, grads) = batch_prefix_regression(&self.g, batch)?;
        self.opt.step(&mut self.g.params_mut(), &grads)?;
        Ok(TrainStats {
            decomposition_loss: Some(loss),
            step_loss: None,
        })
    }

    fn relabel(&self, traj: &Trajectory, _stats: &BufferStats) -> Vec<f64> {
        self.predictions(traj).windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn is_markov(&self) -> bool {
        false
    }

    fn checkpoint(&self, ck: &mut Checkpoint) {
        ck.add_module("g", &self.g);
    }
}

/// Min-max normalised episodic return on every step.
pub struct Ircr;

impl Ircr {
    pub fn normalised(ret: f64, stats: &BufferStats) -> f64 {
        match (stats.min_return, stats.max_return) {
            (Some(lo), Some(hi)) if stats.n_trajectories > 0 && hi > lo => (ret - lo) / (hi - lo),
            _ => 0.0,
        }
    }
}

impl Redistribution for Ircr {
    fn tag(&self) -> MethodTag {
        MethodTag::Ircr
    }

    fn train_batch(&mut self, _batch: &[&Trajectory], _rng: &mut ChaCha8Rng) -> Result<TrainStats> {
        Ok(TrainStats::default())
    }

    fn relabel(&self, traj: &Trajectory, stats: &BufferStats) -> Vec<f64> {
        vec![Self::normalised(traj.episodic_return, stats); traj.len()]
    }

    fn relabel_step(&self, traj: &Trajectory, _t: usize, stats: &BufferStats) -> f64 {
        Self::normalised(traj.episodic_return, stats)
    }

    fn is_markov(&self) -> bool {
        true
    }
}

/// Step model regressed on random subsets of `k` steps.
pub struct Rrd {
    pub phi: StepRewardModel,
    opt: Adam,
    pub k: usize,
}

impl Rrd {
    pub fn new(phi: StepRewardModel, lr: f64, k: usize) -> Self {
        Self {
            phi,
            opt: Adam::new(lr),
            k,
        }
    }
}

impl Redistribution for Rrd {
    fn tag(&self) -> MethodTag {
        MethodTag::Rrd
    }

    fn train_batch(&mut self, batch: &[&Trajectory], rng: &mut ChaCha8Rng) -> Result<TrainStats> {
        let with_idx: Vec<(&Trajectory, Vec<usize>)> = batch
            .iter()
            .map(|t| {
                let k = self.k.min(t.len());
                let mut idx = sample(rng, t.len(), k).into_vec();
                idx.sort_unstable();
                (*t, idx)
            })
            .collect();
        let (loss, grads) = batch_rrd_loss(&self.phi, &with_idx)?;
        self.opt.step(&mut self.phi.params_mut(), &grads)?;
        Ok(TrainStats {
            decomposition_loss: Some(loss),
            step_loss: None,
        })
    }

    fn relabel(&self, traj: &Trajectory, _stats: &BufferStats) -> Vec<f64> {
        (0..traj.len()).map(|t| self.phi.reward(traj.pair(t), t)).collect()
    }

    fn relabel_step(&self, traj: &Trajectory, t: usize, _stats: &BufferStats) -> f64 {
        self.phi.reward(traj.pair(t), t)
    }

    fn is_markov(&self) -> bool {
        true
    }

    fn checkpoint(&self, ck: &mut Checkpoint) {
        ck.add_module("phi", &self.phi);
    }
}

/// The raw delayed signal: `R_ep` on the last step, zero before it.
pub struct Episodic;

impl Redistribution for Episodic {
    fn tag(&self) -> MethodTag {
        MethodTag::Episodic
    }

    fn train_batch(&mut self, _batch: &[&Trajectory], _rng: &mut ChaCha8Rng) -> Result<TrainStats> {
        Ok(TrainStats::default())
    }

    fn relabel(&self, traj: &Trajectory, _stats: &BufferStats) -> Vec<f64> {
        let mut r = vec![0.0; traj.len()];
        if let Some(last) = r.last_mut() {
            *last = traj.episodic_return;
        }
        r
    }

    fn relabel_step(&self, traj: &Trajectory, t: usize, _stats: &BufferStats) -> f64 {
        if t + 1 == traj.len() {
            traj.episodic_return
        } else {
            0.0
        }
    }

    fn is_markov(&self) -> bool {
        false
    }
}
