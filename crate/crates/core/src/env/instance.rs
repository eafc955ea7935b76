use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::mdp::EnumeratedMdp;
use crate::env::trajectory::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Chain,
    KeyDoorGrid,
    PointMazeGrid,
    Custom,
}

/// What an agent sees after acting: the next state and whether the episode
/// is over. There is deliberately no reward field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub state: usize,
    pub done: bool,
}

/// Agent-facing interface of an episodic-reward environment.
pub trait EpisodicEnv {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Reseed and draw the initial state.
    fn reset(&mut self, seed: u64) -> usize;
    fn step(&mut self, action: usize) -> Result<Step>;
    /// The episodic return; only available once the episode is done.
    fn finish_episode(&mut self) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Idle,
    Running,
    Done,
}

/// An [`EnumeratedMdp`] driven one step at a time.
#[derive(Clone, Debug)]
pub struct EnvInstance {
    kind: EnvKind,
    name: String,
    mdp: EnumeratedMdp,
    rng: ChaCha8Rng,
    phase: Phase,
    states: Vec<usize>,
    actions: Vec<usize>,
    hidden_return: f64,
}

impl EnvInstance {
    pub fn new(kind: EnvKind, name: impl Into<String>, mdp: EnumeratedMdp) -> Self {
        Self {
            kind,
            name: name.into(),
            mdp,
            rng: ChaCha8Rng::seed_from_u64(0),
            phase: Phase::Idle,
            states: Vec::new(),
            actions: Vec::new(),
            hidden_return: 0.0,
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The underlying tables, including hidden rewards. Oracle privilege.
    pub fn oracle_mdp(&self) -> &EnumeratedMdp {
        &self.mdp
    }

    pub fn current_state(&self) -> Option<usize> {
        match self.phase {
            Phase::Idle => None,
            _ => self.states.last().copied(),
        }
    }

    pub fn elapsed(&self) -> usize {
        self.actions.len()
    }

    /// The finished episode with its return.
    pub fn trajectory(&self) -> Result<Trajectory> {
        if self.phase != Phase::Done {
            return Err(Error::Episode("trajectory requested before the episode ended".into()));
        }
        let last = *self.states.last().expect("a reset episode has a state");
        Ok(Trajectory::new(self.states.clone(), self.actions.clone(), self.hidden_return)?
            .with_terminated(self.mdp.is_terminal(last)))
    }
}

impl EpisodicEnv for EnvInstance {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    fn reset(&mut self, seed: u64) -> usize {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = self.mdp.sample_initial(&mut self.rng);
        self.states.clear();
        self.actions.clear();
        self.states.push(s0);
        self.hidden_return = 0.0;
        self.phase = Phase::Running;
        s0
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        match self.phase {
            Phase::Idle => return Err(Error::Episode("step before reset".into())),
            Phase::Done => return Err(Error::Episode("step after the episode ended".into())),
            Phase::Running => {}
        }
        if action >= self.mdp.n_actions() {
            return Err(Error::Episode(format!(
                "action {action} out of range (n_actions = {})",
                self.mdp.n_actions()
            )));
        }
        let s = *self.states.last().expect("running episode has a state");
        self.hidden_return += self.mdp.hidden_reward(s, action);
        let next = self.mdp.sample_next(s, action, &mut self.rng);
        self.actions.push(action);
        self.states.push(next);
        let done = self.mdp.is_terminal(next) || self.actions.len() == self.mdp.horizon();
        if done {
            self.phase = Phase::Done;
        }
        Ok(Step { state: next, done })
    }

    fn finish_episode(&mut self) -> Result<f64> {
        if self.phase != Phase::Done {
            return Err(Error::Episode("episodic return requested mid-episode".into()));
        }
        Ok(self.hidden_return)
    }
}
