//! Exact step-wise proxy reward for a given policy.
//!
//! `r(s, a, t) = sum_prefix w(prefix | s) * (R(prefix + (s, a)) - R(prefix))`
//! where the weight of a length-`t` prefix is the joint probability of the
//! prefix and of landing in `s` at step `t`, divided by the occupancy
//! `rho_t(s)`.

use crate::decomposition::scorer::SegmentScorer;
use crate::env::enumerate::{enumerate_prefixes, enumeration_size, occupancies, DEFAULT_ENUMERATION_CAP};
use crate::env::mdp::{EnumeratedMdp, TabularPolicy};
use crate::env::trajectory::Pair;
use crate::error::{Error, Result};

/// Single query by explicit prefix enumeration.
pub fn exact_step_reward_oracle<S: SegmentScorer>(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    psi: &S,
    s: usize,
    a: usize,
    t: usize,
) -> Result<f64> {
    if s >= mdp.n_states() || a >= mdp.n_actions() {
        return Err(Error::invalid(format!("pair ({s}, {a}) out of range")));
    }
    if t >= mdp.horizon() {
        return Err(Error::invalid(format!("step {t} is not before horizon {}", mdp.horizon())));
    }
    if mdp.is_terminal(s) {
        return Err(Error::UndefinedState { state: s, t });
    }
    let mut mass = 0.0;
    let mut acc = 0.0;
    let mut extended: Vec<Pair> = Vec::with_capacity(t + 1);
    for prefix in enumerate_prefixes(mdp, policy, t)? {
        if prefix.state != s {
            continue;
        }
        extended.clear();
        extended.extend_from_slice(&prefix.pairs);
        extended.push((s, a));
        let diff = psi.score(&extended) - psi.score(&prefix.pairs);
        acc += prefix.probability * diff;
        mass += prefix.probability;
    }
    if mass == 0.0 {
        return Err(Error::UndefinedState { state: s, t });
    }
    Ok(acc / mass)
}

/// The full `r(s, a, t)` table, built by one walk over the prefix tree.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    /// `table[(t * S + s) * A + a]`.
    table: Vec<f64>,
    /// Prefix mass reaching `(s, t)`; equals `rho_t(s)` for non-terminal `s`.
    mass: Vec<f64>,
    occupancy: Vec<Vec<f64>>,
}

impl ExactOracle {
    pub fn build<S: SegmentScorer>(mdp: &EnumeratedMdp, policy: &TabularPolicy, psi: &S) -> Result<Self> {
        let (ns, na, h) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
        let required = enumeration_size(ns, na, h);
        if required > DEFAULT_ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                required,
                cap: DEFAULT_ENUMERATION_CAP,
            });
        }
        let occupancy = occupancies(mdp, policy)?;
        let mut oracle = Self {
            n_states: ns,
            n_actions: na,
            horizon: h,
            table: vec![0.0; h * ns * na],
            mass: vec![0.0; h * ns],
            occupancy,
        };
        let root = psi.start();
        for (s0, &p0) in mdp.initial().iter().enumerate() {
            if p0 > 0.0 {
                oracle.walk(mdp, policy, psi, 0, s0, p0, &root, 0.0);
            }
        }
        for t in 0..h {
            for s in 0..ns {
                let m = oracle.mass[t * ns + s];
                if m > 0.0 {
                    for a in 0..na {
                        oracle.table[(t * ns + s) * na + a] /= m;
                    }
                }
            }
        }
        Ok(oracle)
    }

    #[allow(clippy::too_many_arguments)]
    fn walk<S: SegmentScorer>(
        &mut self,
        mdp: &EnumeratedMdp,
        policy: &TabularPolicy,
        psi: &S,
        t: usize,
        s: usize,
        p: f64,
        state: &S::State,
        prefix_score: f64,
    ) {
        if mdp.is_terminal(s) {
            return;
        }
        let (ns, na) = (self.n_states, self.n_actions);
        self.mass[t * ns + s] += p;
        for a in 0..na {
            let mut next_state = state.clone();
            psi.push(&mut next_state, (s, a));
            let score = psi.readout(&next_state);
            self.table[(t * ns + s) * na + a] += p * (score - prefix_score);
            let pa = p * policy.prob(s, a);
            if pa == 0.0 || t + 1 == self.horizon {
                continue;
            }
            for (next, &pn) in mdp.transition_row(s, a).iter().enumerate() {
                if pn > 0.0 {
                    self.walk(mdp, policy, psi, t + 1, next, pa * pn, &next_state, score);
                }
            }
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_defined(&self, s: usize, t: usize) -> bool {
        t < self.horizon && self.mass[t * self.n_states + s] > 0.0
    }

    /// `r(s, a, t)`; errors when `(s, t)` has zero occupancy.
    pub fn reward(&self, s: usize, a: usize, t: usize) -> Result<f64> {
        if !self.is_defined(s, t) {
            return Err(Error::UndefinedState { state: s, t });
        }
        Ok(self.table[(t * self.n_states + s) * self.n_actions + a])
    }

    /// Same as [`ExactOracle::reward`] with zero for undefined entries.
    pub fn reward_or_zero(&self, s: usize, a: usize, t: usize) -> f64 {
        self.reward(s, a, t).unwrap_or(0.0)
    }

    /// Prefix mass that reached `(s, t)`.
    pub fn mass(&self, s: usize, t: usize) -> f64 {
        self.mass[t * self.n_states + s]
    }

    pub fn occupancy(&self) -> &[Vec<f64>] {
        &self.occupancy
    }
}
