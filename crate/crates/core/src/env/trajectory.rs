use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `(state, action)` pair.
pub type Pair = (usize, usize);

/// One completed episode: `len + 1` states, `len` actions, and the
/// episodic return revealed at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub episodic_return: f64,
    /// The episode ended in a terminal state rather than at the horizon.
    #[serde(default)]
    pub terminated: bool,
}

impl Trajectory {
    pub fn new(states: Vec<usize>, actions: Vec<usize>, episodic_return: f64) -> Result<Self> {
        if states.len() != actions.len() + 1 {
            return Err(Error::Episode(format!(
                "trajectory has {} states for {} actions",
                states.len(),
                actions.len()
            )));
        }
        if !episodic_return.is_finite() {
            return Err(Error::NonFinite("episodic return"));
        }
        Ok(Self {
            states,
            actions,
            episodic_return,
            terminated: false,
        })
    }

    /// Build from pairs and the state reached after the last one.
    pub fn from_pairs(pairs: &[Pair], last_state: usize, episodic_return: f64) -> Result<Self> {
        let mut states: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        states.push(last_state);
        Self::new(states, pairs.iter().map(|p| p.1).collect(), episodic_return)
    }

    pub fn with_terminated(mut self, terminated: bool) -> Self {
        self.terminated = terminated;
        self
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    #[inline]
    pub fn pair(&self, t: usize) -> Pair {
        (self.states[t], self.actions[t])
    }

    pub fn pairs(&self) -> Vec<Pair> {
        (0..self.len()).map(|t| self.pair(t)).collect()
    }

    pub fn last_state(&self) -> usize {
        self.states[self.len()]
    }
}

/// One-hot encoding of a state concatenated with a one-hot action. With
/// `state_only` the action block is dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEncoder {
    pub n_states: usize,
    pub n_actions: usize,
    pub state_only: bool,
}

impl PairEncoder {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            state_only: false,
        }
    }

    pub fn dim(&self) -> usize {
        if self.state_only {
            self.n_states
        } else {
            self.n_states + self.n_actions
        }
    }

    pub fn encode(&self, (s, a): Pair) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[s] = 1.0;
        if !self.state_only {
            x[self.n_states + a] = 1.0;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_roundtrip() {
        let t = Trajectory::from_pairs(&[(0, 1), (2, 0)], 3, 1.5).unwrap();
        assert_eq!(t.states, vec![0, 2, 3]);
        assert_eq!(t.pairs(), vec![(0, 1), (2, 0)]);
        assert_eq!(t.last_state(), 3);
    }

    #[test]
    fn inconsistent_lengths_rejected() {
        assert!(Trajectory::new(vec![0, 1], vec![0, 0], 0.0).is_err());
    }

    #[test]
    fn encoder_layout() {
        let e = PairEncoder::new(3, 2);
        assert_eq!(e.encode((1, 1)), vec![0.0, 1.0, 0.0, 0.0, 1.0]);
        let so = PairEncoder { state_only: true, ..e };
        assert_eq!(so.encode((2, 0)), vec![0.0, 0.0, 1.0]);
    }
}
