use crate::env::mdp::EnumeratedMdp;
use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::param::{Module, Param};
use crate::rl::agent::{Agent, Transition, UpdateStats};

/// Tabular step size used when nothing else is configured.
pub const DEFAULT_Q_LR: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Param,
    pub lr: f64,
    gamma: f64,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, lr: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::config("gamma", format!("{gamma} outside (0, 1]")));
        }
        if !(lr > 0.0 && lr <= 1.0) {
            return Err(Error::config("q_lr", format!("{lr} outside (0, 1]")));
        }
        Ok(Self {
            n_states,
            n_actions,
            values: Param::zeros("q", n_states, n_actions),
            lr,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values.data[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values.data[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// One bootstrapped update toward `r + gamma * max Q(s', .) * (1 - done)`.
    /// Returns the TD error before the update.
    pub fn q_update(&mut self, s: usize, a: usize, r: f64, next: usize, done: bool) -> f64 {
        let bootstrap = if done { 0.0 } else { self.gamma * self.max_value(next) };
        let delta = r + bootstrap - self.get(s, a);
        let v = self.get(s, a) + self.lr * delta;
        self.set(s, a, v);
        delta
    }
}

impl Module for QTable {
    fn params(&self) -> Vec<&Param> {
        vec![&self.values]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.values]
    }
}

impl Agent for QTable {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn q_values(&self, state: usize) -> Vec<f64> {
        self.row(state).to_vec()
    }

    fn update(&mut self, batch: &[Transition]) -> Result<UpdateStats> {
        if batch.iter().any(|t| !t.reward.is_finite()) {
            return Ok(UpdateStats {
                td_loss: None,
                skipped: true,
            });
        }
        let mut sq = 0.0;
        for t in batch {
            let d = self.q_update(t.state, t.action, t.reward, t.next_state, t.done);
            sq += d * d;
        }
        Ok(UpdateStats {
            td_loss: (!batch.is_empty()).then(|| sq / batch.len() as f64),
            skipped: false,
        })
    }

    fn checkpoint(&self, ck: &mut Checkpoint) {
        ck.add_module("q", self);
    }
}

/// Finite-horizon optimal action values for the reward table `reward[s*A+a]`,
/// undiscounted, indexed `[t][s*A+a]`. Terminal states are absorbing with
/// zero value.
pub fn finite_horizon_q(mdp: &EnumeratedMdp, reward: &[f64]) -> Vec<Vec<f64>> {
    let (ns, na, horizon) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let mut q = vec![vec![0.0; ns * na]; horizon];
    let mut v_next = vec![0.0; ns];
    for t in (0..horizon).rev() {
        for s in 0..ns {
            for a in 0..na {
                let cont: f64 = (0..ns)
                    .filter(|&n| !mdp.is_terminal(n))
                    .map(|n| mdp.p(s, a, n) * v_next[n])
                    .sum();
                q[t][s * na + a] = reward[s * na + a] + cont;
            }
        }
        v_next = (0..ns)
            .map(|s| q[t][s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
    }
    q
}

/// Discounted infinite-horizon optimal action values by value iteration.
pub fn discounted_q(mdp: &EnumeratedMdp, reward: &[f64], gamma: f64, tol: f64) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = vec![0.0; ns * na];
    loop {
        let v: Vec<f64> = (0..ns)
            .map(|s| {
                if mdp.is_terminal(s) {
                    0.0
                } else {
                    q[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect();
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let cont: f64 = (0..ns).map(|n| mdp.p(s, a, n) * v[n]).sum();
                let new = reward[s * na + a] + gamma * cont;
                delta = delta.max((new - q[s * na + a]).abs());
                q[s * na + a] = new;
            }
        }
        if delta < tol {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::mdp::EnumeratedMdp;

    #[test]
    fn zero_reward_fixed_point() {
        let mut q = QTable::new(2, 2, 0.5, 0.99).unwrap();
        q.q_update(0, 1, 0.0, 1, false);
        assert_eq!(q.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn done_update_closed_form() {
        let mut q = QTable::new(2, 2, 0.5, 0.99).unwrap();
        q.q_update(0, 0, 1.0, 1, true);
        assert_eq!(q.get(0, 0), 0.5);
    }

    #[test]
    fn gamma_range_checked() {
        assert!(QTable::new(1, 1, 0.1, 0.0).is_err());
        assert!(QTable::new(1, 1, 0.1, 1.5).is_err());
        assert!(QTable::new(1, 1, 0.1, 1.0).is_ok());
    }

    #[test]
    fn sweeps_converge_to_value_iteration() {
        // Three states in a ring; action 1 advances, action 0 stays.
        let mut transition = vec![0.0; 3 * 2 * 3];
        for s in 0..3 {
            transition[(s * 2) * 3 + s] = 1.0;
            transition[(s * 2 + 1) * 3 + (s + 1) % 3] = 1.0;
        }
        let reward = vec![0.1, 0.0, 0.0, 0.5, -0.2, 1.0];
        let mdp = EnumeratedMdp::new(3, 2, 5, transition, reward.clone(), vec![1.0, 0.0, 0.0], vec![false; 3])
            .unwrap();
        let gamma = 0.9;
        let exact = discounted_q(&mdp, &reward, gamma, 1e-13);
        let mut q = QTable::new(3, 2, 0.5, gamma).unwrap();
        for _ in 0..2000 {
            for s in 0..3 {
                for a in 0..2 {
                    let next = (0..3).find(|&n| mdp.p(s, a, n) > 0.0).unwrap();
                    q.q_update(s, a, reward[s * 2 + a], next, false);
                }
            }
        }
        for (i, e) in exact.iter().enumerate() {
            assert!((q.get(i / 2, i % 2) - e).abs() < 1e-3);
        }
    }
}
