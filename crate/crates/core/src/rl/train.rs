//! The collect / decompose / relabel / update loop.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::methods::{build_method, MethodParams, MethodTag, Redistribution};
use crate::env::instance::{EnvInstance, EpisodicEnv};
use crate::env::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::nn::adam::DEFAULT_LR;
use crate::nn::checkpoint::{Checkpoint, Manifest};
use crate::nn::dense::DEFAULT_HIDDEN;
use crate::rl::agent::{Agent, EpsilonSchedule, Transition};
use crate::rl::buffer::{ReplayBuffer, DEFAULT_CAPACITY};
use crate::rl::dqn::{NeuralQAgent, DEFAULT_TAU};
use crate::rl::eval::{derive_seed, evaluate_greedy, DEFAULT_EVAL_EPISODES};
use crate::rl::qtable::{QTable, DEFAULT_Q_LR};

/// Version tag written into every metrics record.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Tabular,
    Neural,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlParams {
    pub agent: AgentKind,
    pub gamma: f64,
    /// Step size of the tabular agent.
    pub q_lr: f64,
    /// Adam learning rate of the neural agent.
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub tau: f64,
    pub epsilon: EpsilonSchedule,
    /// Decomposition and agent updates after each collected episode (`M`).
    pub updates_per_episode: usize,
    /// Transitions per agent update (`B`).
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub trajectory_capacity: Option<usize>,
}

impl Default for RlParams {
    fn default() -> Self {
        Self {
            agent: AgentKind::Tabular,
            gamma: 0.99,
            q_lr: DEFAULT_Q_LR,
            lr: DEFAULT_LR,
            hidden: DEFAULT_HIDDEN.to_vec(),
            tau: DEFAULT_TAU,
            epsilon: EpsilonSchedule::default(),
            updates_per_episode: 4,
            batch_size: 256,
            buffer_capacity: DEFAULT_CAPACITY,
            trajectory_capacity: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub n_episodes: usize,
    /// Environment steps between evaluations.
    pub eval_interval: usize,
    pub eval_episodes: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            n_episodes: 1000,
            eval_interval: 1000,
            eval_episodes: DEFAULT_EVAL_EPISODES,
        }
    }
}

/// One evaluation point.
///
/// `env_step` counts environment transitions collected for training;
/// `wall_step` counts update rounds (one decomposition batch plus one agent
/// batch). Loss fields average every update since the previous record and
/// are null when there was none. The final record of a run is written after
/// the last episode and has `is_final` set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub schema: u32,
    pub method: MethodTag,
    pub seed: u64,
    pub episode: usize,
    pub env_step: usize,
    pub wall_step: usize,
    pub mean_return: f64,
    pub decomposition_loss: Option<f64>,
    pub step_loss: Option<f64>,
    pub td_loss: Option<f64>,
    pub skipped_updates: usize,
    pub is_final: bool,
}

#[derive(Clone, Debug, Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, x: Option<f64>) {
        if let Some(x) = x {
            self.sum += x;
            self.n += 1;
        }
    }

    fn take(&mut self) -> Option<f64> {
        let out = (self.n > 0).then(|| self.sum / self.n as f64);
        *self = Self::default();
        out
    }
}

#[derive(Clone, Debug, Default)]
struct LossWindow {
    decomposition: Mean,
    step: Mean,
    td: Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub records: Vec<MetricsRecord>,
    pub episodes: usize,
    pub env_steps: usize,
    pub skipped_updates: usize,
}

impl RunSummary {
    pub fn final_return(&self) -> Option<f64> {
        self.records.last().map(|r| r.mean_return)
    }
}

pub struct Trainer {
    env: EnvInstance,
    eval_env: EnvInstance,
    method: Box<dyn Redistribution>,
    method_tag: MethodTag,
    cut_points: usize,
    agent: Box<dyn Agent>,
    buffer: ReplayBuffer,
    rl: RlParams,
    schedule: Schedule,
    seed: u64,
    decomposition_batch: usize,
    collect_rng: ChaCha8Rng,
    train_rng: ChaCha8Rng,
    episode: usize,
    env_step: usize,
    wall_step: usize,
    next_eval: usize,
    skipped: usize,
    losses: LossWindow,
}

impl Trainer {
    pub fn new(
        env: EnvInstance,
        tag: MethodTag,
        method_params: &MethodParams,
        rl: RlParams,
        schedule: Schedule,
        seed: u64,
    ) -> Result<Self> {
        if rl.batch_size == 0 {
            return Err(Error::config("rl.batch_size", "must be at least 1"));
        }
        if schedule.eval_interval == 0 {
            return Err(Error::config("run.eval_interval", "must be at least 1"));
        }
        if schedule.eval_episodes == 0 {
            return Err(Error::config("run.eval_episodes", "must be at least 1"));
        }
        let (ns, na, horizon) = (env.n_states(), env.n_actions(), env.horizon());
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
        let method = build_method(tag, method_params, ns, na, horizon, &mut init_rng)?;
        let agent: Box<dyn Agent> = match rl.agent {
            AgentKind::Tabular => Box::new(QTable::new(ns, na, rl.q_lr, rl.gamma)?),
            AgentKind::Neural => Box::new(NeuralQAgent::new(
                ns,
                na,
                &rl.hidden,
                rl.lr,
                rl.gamma,
                rl.tau,
                &mut init_rng,
            )?),
        };
        let buffer = ReplayBuffer::new(rl.buffer_capacity, rl.trajectory_capacity)?;
        Ok(Self {
            eval_env: env.clone(),
            env,
            method,
            method_tag: tag,
            cut_points: method_params.cut_points,
            agent,
            buffer,
            decomposition_batch: method_params.trajectory_batch.unwrap_or(rl.batch_size),
            rl,
            schedule,
            seed,
            collect_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 2)),
            train_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 3)),
            episode: 0,
            env_step: 0,
            wall_step: 0,
            next_eval: 0,
            skipped: 0,
            losses: LossWindow::default(),
        })
    }

    pub fn agent(&self) -> &dyn Agent {
        self.agent.as_ref()
    }

    pub fn method(&self) -> &dyn Redistribution {
        self.method.as_ref()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn env_step(&self) -> usize {
        self.env_step
    }

    /// Run every remaining episode, handing each record to `sink` as soon
    /// as it exists.
    pub fn run(&mut self, sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>) -> Result<RunSummary> {
        let mut records = Vec::new();
        let mut emit = |r: MetricsRecord, records: &mut Vec<MetricsRecord>| -> Result<()> {
            sink(&r)?;
            records.push(r);
            Ok(())
        };
        while self.episode < self.schedule.n_episodes {
            if self.next_eval == 0 {
                let r = self.record(false)?;
                emit(r, &mut records)?;
                self.next_eval = self.schedule.eval_interval;
            }
            self.collect_episode()?;
            while self.env_step >= self.next_eval {
                let mut r = self.record(false)?;
                r.env_step = self.next_eval;
                emit(r, &mut records)?;
                self.next_eval += self.schedule.eval_interval;
            }
            for _ in 0..self.rl.updates_per_episode {
                self.update_round()?;
            }
        }
        let r = self.record(true)?;
        emit(r, &mut records)?;
        Ok(RunSummary {
            records,
            episodes: self.episode,
            env_steps: self.env_step,
            skipped_updates: self.skipped,
        })
    }

    fn record(&mut self, is_final: bool) -> Result<MetricsRecord> {
        let eval = evaluate_greedy(
            &mut self.eval_env,
            self.agent.as_ref(),
            self.schedule.eval_episodes,
            derive_seed(self.seed, 4),
        )?;
        Ok(MetricsRecord {
            schema: METRICS_SCHEMA_VERSION,
            method: self.method_tag,
            seed: self.seed,
            episode: self.episode,
            env_step: self.env_step,
            wall_step: self.wall_step,
            mean_return: eval.mean_return,
            decomposition_loss: self.losses.decomposition.take(),
            step_loss: self.losses.step.take(),
            td_loss: self.losses.td.take(),
            skipped_updates: self.skipped,
            is_final,
        })
    }

    /// Roll out one epsilon-greedy episode and store it.
    pub fn collect_episode(&mut self) -> Result<Trajectory> {
        let epsilon = self.rl.epsilon.value(self.episode, self.schedule.n_episodes);
        let episode_seed = derive_seed(self.seed ^ 0x5eed, self.episode as u64);
        let mut s = self.env.reset(episode_seed);
        loop {
            let a = self.agent.explore(s, epsilon, &mut self.collect_rng);
            let step = self.env.step(a)?;
            self.env_step += 1;
            s = step.state;
            if step.done {
                break;
            }
        }
        let ret = self.env.finish_episode()?;
        let traj = self.env.trajectory()?;
        debug_assert_eq!(traj.episodic_return, ret);
        self.buffer.push(traj.clone())?;
        self.episode += 1;
        Ok(traj)
    }

    /// One decomposition batch followed by one agent batch on relabeled
    /// transitions.
    pub fn update_round(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let trajs = self
            .buffer
            .sample_trajectories(self.decomposition_batch, &mut self.train_rng);
        let stats = self.method.train_batch(&trajs, &mut self.train_rng)?;
        self.losses.decomposition.add(stats.decomposition_loss);
        self.losses.step.add(stats.step_loss);

        let batch = self.relabeled_batch();
        let upd = self.agent.update(&batch)?;
        self.losses.td.add(upd.td_loss);
        if upd.skipped {
            self.skipped += 1;
        }
        self.wall_step += 1;
        Ok(())
    }

    /// Sample transitions and relabel them with the current method. Only a
    /// terminal final state stops bootstrapping; reaching the horizon does not.
    pub fn relabeled_batch(&mut self) -> Vec<Transition> {
        let refs = self.buffer.sample_transitions(self.rl.batch_size, &mut self.train_rng);
        let stats = self.buffer.stats();
        let mut cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        refs.iter()
            .map(|r| {
                let traj = self.buffer.get(r.trajectory).expect("sampled index is stored");
                let reward = if self.method.is_markov() {
                    self.method.relabel_step(traj, r.t, &stats)
                } else {
                    cache
                        .entry(r.trajectory)
                        .or_insert_with(|| self.method.relabel(traj, &stats))[r.t]
                };
                Transition {
                    state: traj.states[r.t],
                    action: traj.actions[r.t],
                    reward,
                    next_state: traj.states[r.t + 1],
                    done: r.t + 1 == traj.len() && traj.terminated,
                }
            })
            .collect()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut extra = BTreeMap::new();
        extra.insert("seed".to_string(), self.seed.to_string());
        extra.insert("episode".to_string(), self.episode.to_string());
        extra.insert("env_step".to_string(), self.env_step.to_string());
        let mut ck = Checkpoint::new(Manifest {
            method: self.method_tag.to_string(),
            m: self.cut_points,
            step: self.wall_step as u64,
            extra,
        });
        self.method.checkpoint(&mut ck);
        self.agent.checkpoint(&mut ck);
        ck
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::roster::chain;

    fn small_params() -> MethodParams {
        MethodParams {
            gru_hidden: 8,
            step_hidden: vec![16],
            trajectory_batch: Some(4),
            ..MethodParams::default()
        }
    }

    fn schedule(n: usize) -> Schedule {
        Schedule {
            n_episodes: n,
            eval_interval: 20,
            eval_episodes: 2,
        }
    }

    #[test]
    fn zero_updates_only_collects() {
        let env = chain(5, 5, None).unwrap();
        let rl = RlParams {
            updates_per_episode: 0,
            batch_size: 16,
            ..RlParams::default()
        };
        let mut tr = Trainer::new(env, MethodTag::Diaster, &small_params(), rl, schedule(10), 0).unwrap();
        let summary = tr.run(&mut |_| Ok(())).unwrap();
        assert!(summary.records.iter().all(|r| r.wall_step == 0 && r.td_loss.is_none()));
        assert!(summary.records.iter().all(|r| r.mean_return == summary.records[0].mean_return));
        assert_eq!(tr.buffer().len(), 10);
    }

    #[test]
    fn identical_seeds_identical_records() {
        let run = || {
            let env = chain(5, 5, None).unwrap();
            let rl = RlParams {
                batch_size: 16,
                updates_per_episode: 1,
                ..RlParams::default()
            };
            let mut tr = Trainer::new(env, MethodTag::Diaster, &small_params(), rl, schedule(15), 3).unwrap();
            tr.run(&mut |_| Ok(())).unwrap().records
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn env_steps_monotone_and_final_flagged() {
        let env = chain(5, 5, None).unwrap();
        let rl = RlParams {
            batch_size: 8,
            updates_per_episode: 1,
            ..RlParams::default()
        };
        let mut tr = Trainer::new(env, MethodTag::Ircr, &small_params(), rl, schedule(12), 1).unwrap();
        let s = tr.run(&mut |_| Ok(())).unwrap();
        assert!(s.records.windows(2).all(|w| w[0].env_step <= w[1].env_step));
        assert!(s.records.last().unwrap().is_final);
        assert_eq!(s.records.iter().filter(|r| r.is_final).count(), 1);
    }
}
