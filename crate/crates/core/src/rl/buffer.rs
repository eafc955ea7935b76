use std::collections::VecDeque;

use rand::Rng;

use crate::decomposition::methods::BufferStats;
use crate::env::trajectory::Trajectory;
use crate::error::{Error, Result};

/// Transition capacity used when nothing else is configured.
pub const DEFAULT_CAPACITY: usize = 1_000_000;

/// Address of one stored transition: trajectory slot and step index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionRef {
    pub trajectory: usize,
    pub t: usize,
}

/// FIFO store of complete trajectories, sampled either whole or per
/// transition.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    trajectories: VecDeque<Trajectory>,
    /// Global offset of each stored trajectory's first transition.
    starts: VecDeque<usize>,
    next_start: usize,
    n_transitions: usize,
    capacity: usize,
    trajectory_capacity: Option<usize>,
    pushed: usize,
    min_return: Option<f64>,
    max_return: Option<f64>,
}

impl ReplayBuffer {
    /// `capacity` bounds the number of stored transitions; the optional
    /// second bound limits the number of trajectories.
    pub fn new(capacity: usize, trajectory_capacity: Option<usize>) -> Result<Self> {
        if capacity == 0 || trajectory_capacity == Some(0) {
            return Err(Error::invalid("replay buffer capacity must be positive"));
        }
        Ok(Self {
            trajectories: VecDeque::new(),
            starts: VecDeque::new(),
            next_start: 0,
            n_transitions: 0,
            capacity,
            trajectory_capacity,
            pushed: 0,
            min_return: None,
            max_return: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stored trajectories.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_transitions(&self) -> usize {
        self.n_transitions
    }

    /// Trajectories ever pushed, including evicted ones.
    pub fn pushed(&self) -> usize {
        self.pushed
    }

    pub fn get(&self, i: usize) -> Option<&Trajectory> {
        self.trajectories.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter()
    }

    /// Store a finished episode, evicting the oldest ones as needed.
    pub fn push(&mut self, traj: Trajectory) -> Result<()> {
        if traj.is_empty() {
            return Err(Error::Episode("cannot store an empty trajectory".into()));
        }
        if !traj.episodic_return.is_finite() {
            return Err(Error::NonFinite("stored episodic return"));
        }
        if traj.len() > self.capacity {
            return Err(Error::invalid(format!(
                "trajectory of length {} exceeds buffer capacity {}",
                traj.len(),
                self.capacity
            )));
        }
        while self.n_transitions + traj.len() > self.capacity
            || self.trajectory_capacity.is_some_and(|cap| self.trajectories.len() >= cap)
        {
            self.evict_oldest();
        }
        let r = traj.episodic_return;
        self.min_return = Some(self.min_return.map_or(r, |m| m.min(r)));
        self.max_return = Some(self.max_return.map_or(r, |m| m.max(r)));
        self.starts.push_back(self.next_start);
        self.next_start += traj.len();
        self.n_transitions += traj.len();
        self.trajectories.push_back(traj);
        self.pushed += 1;
        Ok(())
    }

    fn evict_oldest(&mut self) {
        if let Some(old) = self.trajectories.pop_front() {
            self.starts.pop_front();
            self.n_transitions -= old.len();
        }
    }

    pub fn stats(&self) -> BufferStats {
        BufferStats {
            n_trajectories: self.trajectories.len(),
            min_return: self.min_return,
            max_return: self.max_return,
        }
    }

    /// `n` trajectories drawn uniformly with replacement.
    pub fn sample_trajectories<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Trajectory> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.trajectories[rng.gen_range(0..self.trajectories.len())])
            .collect()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample_transitions<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<TransitionRef> {
        if self.n_transitions == 0 {
            return Vec::new();
        }
        let base = self.starts[0];
        (0..n)
            .map(|_| self.locate(base + rng.gen_range(0..self.n_transitions)))
            .collect()
    }

    /// Every stored transition in insertion order.
    pub fn all_transitions(&self) -> Vec<TransitionRef> {
        self.trajectories
            .iter()
            .enumerate()
            .flat_map(|(i, tr)| (0..tr.len()).map(move |t| TransitionRef { trajectory: i, t }))
            .collect()
    }

    fn locate(&self, global: usize) -> TransitionRef {
        let i = self.starts.partition_point(|&s| s <= global) - 1;
        TransitionRef {
            trajectory: i,
            t: global - self.starts[i],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn traj(len: usize, r: f64) -> Trajectory {
        Trajectory::new((0..=len).collect(), vec![0; len], r).unwrap()
    }

    #[test]
    fn roundtrip_all_transitions() {
        let mut b = ReplayBuffer::new(100, None).unwrap();
        b.push(traj(2, 1.0)).unwrap();
        b.push(traj(1, 0.0)).unwrap();
        let all = b.all_transitions();
        assert_eq!(all.len(), 3);
        assert_eq!(all[2], TransitionRef { trajectory: 1, t: 0 });
    }

    #[test]
    fn fifo_by_trajectory_count() {
        let mut b = ReplayBuffer::new(100, Some(2)).unwrap();
        for r in [1.0, 2.0, 3.0] {
            b.push(traj(2, r)).unwrap();
        }
        let returns: Vec<f64> = b.iter().map(|t| t.episodic_return).collect();
        assert_eq!(returns, vec![2.0, 3.0]);
        // Min and max cover everything ever stored.
        assert_eq!(b.stats().min_return, Some(1.0));
    }

    #[test]
    fn transition_capacity_respected() {
        let mut b = ReplayBuffer::new(5, None).unwrap();
        for _ in 0..4 {
            b.push(traj(2, 0.0)).unwrap();
            assert!(b.n_transitions() <= 5);
        }
        assert_eq!(b.len(), 2);
        assert!(b.push(traj(6, 0.0)).is_err());
    }

    #[test]
    fn empty_trajectory_rejected() {
        let mut b = ReplayBuffer::new(5, None).unwrap();
        assert!(b.push(traj(0, 0.0)).is_err());
    }

    #[test]
    fn sampling_covers_every_transition_after_eviction() {
        let mut b = ReplayBuffer::new(6, None).unwrap();
        for len in [3, 2, 4] {
            b.push(traj(len, 0.0)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = b.sample_transitions(2000, &mut rng);
        seen.sort();
        seen.dedup();
        assert_eq!(seen, b.all_transitions());
    }
}
