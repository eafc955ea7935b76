//! Value network agent with an exponentially averaged target network.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::adam::Adam;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::dense::{Activation, DenseNet};
use crate::nn::graph::Graph;
use crate::nn::param::{soft_update, Grads, Module};
use crate::rl::agent::{Agent, Transition, UpdateStats};

/// Target smoothing coefficient.
pub const DEFAULT_TAU: f64 = 0.005;

#[derive(Clone, Debug)]
pub struct NeuralQAgent {
    pub online: DenseNet,
    pub target: DenseNet,
    pub tau: f64,
    gamma: f64,
    opt: Adam,
    n_states: usize,
}

impl NeuralQAgent {
    /// Both networks start from identical parameters.
    pub fn new<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        hidden: &[usize],
        lr: f64,
        gamma: f64,
        tau: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::config("gamma", format!("{gamma} outside (0, 1]")));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::config("tau", format!("{tau} outside (0, 1]")));
        }
        let online = DenseNet::new("q", n_states, hidden, n_actions, Activation::Relu, rng);
        let target = online.clone();
        Ok(Self {
            online,
            target,
            tau,
            gamma,
            opt: Adam::new(lr),
            n_states,
        })
    }

    fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n_states];
        x[s] = 1.0;
        x
    }

    fn values(net: &DenseNet, x: &[f64]) -> Vec<f64> {
        net.forward(x).expect("one-hot input matches the network")
    }

    /// Bootstrapped targets from the target network.
    pub fn targets(&self, batch: &[Transition]) -> Vec<f64> {
        batch
            .iter()
            .map(|t| {
                let bootstrap = if t.done {
                    0.0
                } else {
                    let q = Self::values(&self.target, &self.one_hot(t.next_state));
                    self.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                t.reward + bootstrap
            })
            .collect()
    }

    /// Mean squared TD error and its gradient with respect to the online
    /// network's parameters.
    pub fn td_loss(&self, batch: &[Transition]) -> Result<(f64, Grads)> {
        if batch.is_empty() {
            return Err(Error::invalid("td loss on an empty batch"));
        }
        let targets = self.targets(batch);
        let mut g = Graph::new();
        let vars = self.online.bind(&mut g);
        let mut terms = Vec::with_capacity(batch.len());
        for (t, y) in batch.iter().zip(targets) {
            let x = g.constant(self.one_hot(t.state));
            let q = self.online.forward_graph(&mut g, &vars, x);
            let qa = g.index(q, t.action);
            let yv = g.scalar(y);
            let d = g.sub(qa, yv);
            terms.push(g.square(d));
        }
        let total = g.add_all(&terms);
        let loss = g.scale(total, 1.0 / batch.len() as f64);
        let grads = g.backward(loss)?;
        Ok((g.scalar_value(loss), grads))
    }

    /// One optimizer step followed by a target update. Non-finite losses
    /// skip the step.
    pub fn dqn_update(&mut self, batch: &[Transition]) -> Result<UpdateStats> {
        let (loss, grads) = self.td_loss(batch)?;
        if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Ok(UpdateStats {
                td_loss: None,
                skipped: true,
            });
        }
        self.opt.step(&mut self.online.params_mut(), &grads)?;
        soft_update(&mut self.target, &self.online, self.tau);
        Ok(UpdateStats {
            td_loss: Some(loss),
            skipped: false,
        })
    }
}

impl Agent for NeuralQAgent {
    fn n_actions(&self) -> usize {
        self.online.output_dim()
    }

    fn q_values(&self, state: usize) -> Vec<f64> {
        Self::values(&self.online, &self.one_hot(state))
    }

    fn update(&mut self, batch: &[Transition]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Ok(UpdateStats::default());
        }
        self.dqn_update(batch)
    }

    fn checkpoint(&self, ck: &mut Checkpoint) {
        ck.add_module("q_online", &self.online);
        ck.add_module("q_target", &self.target);
    }
}
