use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::checkpoint::Checkpoint;

/// A relabeled transition. `reward` is a proxy reward, never the hidden one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

/// Outcome of one agent update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub td_loss: Option<f64>,
    /// Set when a non-finite loss caused the step to be skipped.
    pub skipped: bool,
}

pub trait Agent: Send {
    fn n_actions(&self) -> usize;

    /// Action values of `state`.
    fn q_values(&self, state: usize) -> Vec<f64>;

    fn update(&mut self, batch: &[Transition]) -> Result<UpdateStats>;

    fn checkpoint(&self, ck: &mut Checkpoint);

    /// Greedy action, ties resolved toward the lowest index.
    fn greedy(&self, state: usize) -> usize {
        argmax(&self.q_values(state))
    }

    /// Epsilon-greedy action, ties resolved uniformly at random.
    fn explore(&self, state: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
        if rng.gen::<f64>() < epsilon {
            return rng.gen_range(0..self.n_actions());
        }
        let q = self.q_values(state);
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..q.len()).filter(|&a| q[a] == best).collect();
        ties[rng.gen_range(0..ties.len())]
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Every index attaining the maximum.
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of
/// the episodes, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.2,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, episode: usize, n_episodes: usize) -> f64 {
        let span = self.decay_fraction * n_episodes as f64;
        if span <= 0.0 {
            return self.end;
        }
        let frac = episode as f64 / span;
        if frac >= 1.0 {
            return self.end;
        }
        self.start + (self.end - self.start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_endpoints() {
        let e = EpsilonSchedule::default();
        assert_eq!(e.value(0, 100), 1.0);
        assert!((e.value(10, 100) - 0.525).abs() < 1e-12);
        assert_eq!(e.value(20, 100), 0.05);
        assert_eq!(e.value(99, 100), 0.05);
    }

    #[test]
    fn argmax_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_set(&[1.0, 3.0, 3.0]), vec![1, 2]);
    }
}
