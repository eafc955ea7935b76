//! Exact enumeration of trajectory and prefix distributions.

use crate::env::mdp::{EnumeratedMdp, TabularPolicy};
use crate::env::trajectory::Pair;
use crate::error::{Error, Result};

/// Default bound on `(n_states * n_actions)^T`.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTrajectory {
    pub pairs: Vec<Pair>,
    /// State reached after the last action.
    pub last_state: usize,
    /// True when `last_state` is terminal (the episode ended before the horizon).
    pub terminated: bool,
    pub probability: f64,
}

impl WeightedTrajectory {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// State at step `t`, if the episode lasted that long.
    pub fn state_at(&self, t: usize) -> Option<usize> {
        match t.cmp(&self.pairs.len()) {
            std::cmp::Ordering::Less => Some(self.pairs[t].0),
            std::cmp::Ordering::Equal => Some(self.last_state),
            std::cmp::Ordering::Greater => None,
        }
    }
}

/// A length-`t` prefix together with the state it lands in, weighted by the
/// joint probability of both.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPrefix {
    pub pairs: Vec<Pair>,
    pub state: usize,
    pub probability: f64,
}

/// `(n_states * n_actions)^steps`, saturating.
pub fn enumeration_size(n_states: usize, n_actions: usize, steps: usize) -> u128 {
    let base = (n_states * n_actions) as u128;
    let mut total: u128 = 1;
    for _ in 0..steps {
        total = total.saturating_mul(base);
    }
    total
}

fn check_cap(mdp: &EnumeratedMdp, steps: usize, cap: u128) -> Result<()> {
    let required = enumeration_size(mdp.n_states(), mdp.n_actions(), steps);
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    Ok(())
}

/// Every trajectory of `upto` steps (or fewer, if a terminal state is
/// entered) with its exact probability. Zero-probability branches are not
/// listed.
pub fn enumerate_trajectories(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    upto: usize,
) -> Result<Vec<WeightedTrajectory>> {
    enumerate_trajectories_capped(mdp, policy, upto, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_trajectories_capped(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    upto: usize,
    cap: u128,
) -> Result<Vec<WeightedTrajectory>> {
    policy.check_shape(mdp)?;
    if upto > mdp.horizon() {
        return Err(Error::invalid(format!(
            "cannot enumerate {upto} steps past horizon {}",
            mdp.horizon()
        )));
    }
    check_cap(mdp, upto, cap)?;
    let mut out = Vec::new();
    let mut pairs = Vec::with_capacity(upto);
    for (s0, &p0) in mdp.initial().iter().enumerate() {
        if p0 > 0.0 {
            walk(mdp, policy, upto, s0, p0, &mut pairs, &mut out);
        }
    }
    Ok(out)
}

fn walk(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    upto: usize,
    s: usize,
    p: f64,
    pairs: &mut Vec<Pair>,
    out: &mut Vec<WeightedTrajectory>,
) {
    let terminated = mdp.is_terminal(s);
    if terminated || pairs.len() == upto {
        out.push(WeightedTrajectory {
            pairs: pairs.clone(),
            last_state: s,
            terminated,
            probability: p,
        });
        return;
    }
    for a in 0..mdp.n_actions() {
        let pa = p * policy.prob(s, a);
        if pa == 0.0 {
            continue;
        }
        pairs.push((s, a));
        for (next, &pn) in mdp.transition_row(s, a).iter().enumerate() {
            if pn > 0.0 {
                walk(mdp, policy, upto, next, pa * pn, pairs, out);
            }
        }
        pairs.pop();
    }
}

/// All length-`t` prefixes that are still running at step `t`, each with the
/// joint probability of the prefix and the state `s_t` it reaches.
pub fn enumerate_prefixes(mdp: &EnumeratedMdp, policy: &TabularPolicy, t: usize) -> Result<Vec<WeightedPrefix>> {
    policy.check_shape(mdp)?;
    if t > mdp.horizon() {
        return Err(Error::invalid(format!("prefix length {t} exceeds horizon {}", mdp.horizon())));
    }
    check_cap(mdp, t, DEFAULT_ENUMERATION_CAP)?;
    let mut out = Vec::new();
    let mut pairs = Vec::with_capacity(t);
    fn rec(
        mdp: &EnumeratedMdp,
        policy: &TabularPolicy,
        t: usize,
        s: usize,
        p: f64,
        pairs: &mut Vec<Pair>,
        out: &mut Vec<WeightedPrefix>,
    ) {
        if pairs.len() == t {
            out.push(WeightedPrefix {
                pairs: pairs.clone(),
                state: s,
                probability: p,
            });
            return;
        }
        if mdp.is_terminal(s) {
            return;
        }
        for a in 0..mdp.n_actions() {
            let pa = p * policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            pairs.push((s, a));
            for (next, &pn) in mdp.transition_row(s, a).iter().enumerate() {
                if pn > 0.0 {
                    rec(mdp, policy, t, next, pa * pn, pairs, out);
                }
            }
            pairs.pop();
        }
    }
    for (s0, &p0) in mdp.initial().iter().enumerate() {
        if p0 > 0.0 {
            rec(mdp, policy, t, s0, p0, &mut pairs, &mut out);
        }
    }
    Ok(out)
}

/// One forward step of the occupancy: mass on terminal states stops.
pub fn propagate(mdp: &EnumeratedMdp, policy: &TabularPolicy, rho: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; mdp.n_states()];
    for (s, &w) in rho.iter().enumerate() {
        if w == 0.0 || mdp.is_terminal(s) {
            continue;
        }
        for a in 0..mdp.n_actions() {
            let wa = w * policy.prob(s, a);
            if wa == 0.0 {
                continue;
            }
            for (n, p) in next.iter_mut().zip(mdp.transition_row(s, a)) {
                *n += wa * p;
            }
        }
    }
    next
}

/// `rho_t(s)`: probability that the episode is still running at step `t`
/// and sits in `s`. Terminal states hold the mass that arrives there at
/// exactly step `t`.
pub fn state_occupancy(mdp: &EnumeratedMdp, policy: &TabularPolicy, t: usize) -> Result<Vec<f64>> {
    policy.check_shape(mdp)?;
    let mut rho = mdp.initial().to_vec();
    for _ in 0..t {
        rho = propagate(mdp, policy, &rho);
    }
    Ok(rho)
}

/// Occupancies for every `t = 0..=horizon`.
pub fn occupancies(mdp: &EnumeratedMdp, policy: &TabularPolicy) -> Result<Vec<Vec<f64>>> {
    policy.check_shape(mdp)?;
    let mut out = vec![mdp.initial().to_vec()];
    for t in 0..mdp.horizon() {
        let next = propagate(mdp, policy, &out[t]);
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_2x2(horizon: usize) -> EnumeratedMdp {
        EnumeratedMdp::new(2, 2, horizon, vec![0.5; 8], vec![0.0; 4], vec![0.5, 0.5], vec![false; 2]).unwrap()
    }

    #[test]
    fn degenerate_single_trajectory() {
        let mdp = EnumeratedMdp::new(1, 1, 3, vec![1.0], vec![0.0], vec![1.0], vec![false]).unwrap();
        let all = enumerate_trajectories(&mdp, &TabularPolicy::uniform(1, 1), 3).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].probability, 1.0);
        assert_eq!(all[0].pairs, vec![(0, 0); 3]);
    }

    #[test]
    fn hand_enumeration_two_by_two() {
        // Each trajectory: rho0(s0) pi(a0) P(s1) pi(a1) P(s2) = 0.5^5, with
        // 2 initial states * (2 actions * 2 next states)^2 = 32 entries.
        let all = enumerate_trajectories(&uniform_2x2(2), &TabularPolicy::uniform(2, 2), 2).unwrap();
        assert_eq!(all.len(), 32);
        for w in &all {
            assert_eq!(w.probability, 0.5 * 0.5 * 0.5 * 0.5 * 0.5);
        }
        let total: f64 = all.iter().map(|w| w.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_refusal_names_requirement() {
        let mdp = uniform_2x2(20);
        match enumerate_trajectories(&mdp, &TabularPolicy::uniform(2, 2), 20) {
            Err(Error::EnumerationCap { required, cap }) => {
                assert_eq!(required, 4u128.pow(20));
                assert_eq!(cap, DEFAULT_ENUMERATION_CAP);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn occupancy_base_case_and_point_mass() {
        let mdp = EnumeratedMdp::new(
            3,
            1,
            3,
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![0.0; 3],
            vec![1.0, 0.0, 0.0],
            vec![false; 3],
        )
        .unwrap();
        let pol = TabularPolicy::uniform(3, 1);
        assert_eq!(state_occupancy(&mdp, &pol, 0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(state_occupancy(&mdp, &pol, 2).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn prefix_probabilities_marginalise_to_occupancy() {
        let mdp = EnumeratedMdp::new(
            2,
            2,
            3,
            vec![0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 1.0, 0.0],
            vec![0.0; 4],
            vec![0.25, 0.75],
            vec![false; 2],
        )
        .unwrap();
        let pol = TabularPolicy::from_probs(2, 2, vec![0.1, 0.9, 0.6, 0.4]).unwrap();
        for t in 0..=3 {
            let mut marg = [0.0; 2];
            for p in enumerate_prefixes(&mdp, &pol, t).unwrap() {
                marg[p.state] += p.probability;
            }
            let rho = state_occupancy(&mdp, &pol, t).unwrap();
            for s in 0..2 {
                assert!((marg[s] - rho[s]).abs() < 1e-12);
            }
        }
    }
}
