use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How cut points are drawn for a trajectory of length `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPointPlan {
    /// Number of cut points per trajectory.
    pub m: usize,
    /// Draw from `{0, ..., T-1}` instead of `{1, ..., T-1}`. A cut at 0
    /// makes the first segment empty.
    pub include_zero: bool,
}

impl Default for CutPointPlan {
    fn default() -> Self {
        Self { m: 1, include_zero: false }
    }
}

impl CutPointPlan {
    /// Cuts for a trajectory of actual length `len`. Short trajectories
    /// (terminated early) get as many cuts as fit.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let pool = if self.include_zero { len } else { len.saturating_sub(1) };
        let m = self.m.min(pool);
        let offset = usize::from(!self.include_zero);
        let mut cuts: Vec<usize> = sample(rng, pool, m).into_iter().map(|c| c + offset).collect();
        cuts.sort_unstable();
        cuts
    }
}

/// `m` distinct cut points from `{1, ..., T-1}`, sorted.
pub fn sample_cut_points<R: Rng + ?Sized>(horizon: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m > horizon.saturating_sub(1) {
        return Err(Error::invalid(format!(
            "cannot place {m} distinct cut points inside a trajectory of length {horizon}"
        )));
    }
    Ok(CutPointPlan { m, include_zero: false }.sample(horizon, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_cut_points(10, 0, &mut rng).unwrap().is_empty());
        assert_eq!(sample_cut_points(10, 9, &mut rng).unwrap(), (1..10).collect::<Vec<_>>());
        assert!(sample_cut_points(10, 10, &mut rng).is_err());
    }

    #[test]
    fn sorted_distinct_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = sample_cut_points(12, 5, &mut rng).unwrap();
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            assert!(c.iter().all(|&x| (1..12).contains(&x)));
        }
    }

    #[test]
    fn zero_inclusive_plan_reaches_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = CutPointPlan { m: 1, include_zero: true };
        assert!((0..500).any(|_| plan.sample(4, &mut rng) == vec![0]));
    }
}
