use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of probability tables must be within this of one.
pub const PROB_TOL: f64 = 1e-12;

/// Finite-horizon MDP with explicit tables.
///
/// Entering a state flagged terminal ends the episode; no action is taken
/// from it. The per-step reward table is hidden from agents and is reachable
/// only through [`EnumeratedMdp::hidden_reward`], which oracles use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedMdp {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    /// `transition[(s * A + a) * S + s']`.
    transition: Vec<f64>,
    /// `reward[s * A + a]`.
    reward: Vec<f64>,
    initial: Vec<f64>,
    terminal: Vec<bool>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl EnumeratedMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || horizon == 0 {
            return Err(Error::InvalidModel(
                "state count, action count and horizon must be positive".into(),
            ));
        }
        let (s, a) = (n_states, n_actions);
        let sizes = [
            ("transition", transition.len(), s * a * s),
            ("reward", reward.len(), s * a),
            ("initial", initial.len(), s),
            ("terminal", terminal.len(), s),
        ];
        for (what, got, want) in sizes {
            if got != want {
                return Err(Error::InvalidModel(format!("{what} table has {got} entries, expected {want}")));
            }
        }
        for (k, row) in transition.chunks(s).enumerate() {
            check_distribution(row, &format!("transition row (s={}, a={})", k / a, k % a))?;
        }
        check_distribution(&initial, "initial distribution")?;
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidModel("reward table has a non-finite entry".into()));
        }
        if initial.iter().zip(&terminal).any(|(p, t)| *t && *p > 0.0) {
            return Err(Error::InvalidModel("initial distribution puts mass on a terminal state".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            horizon,
            transition,
            reward,
            initial,
            terminal,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition_row(s, a)[next]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    #[inline]
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    /// Per-step reward. Oracle privilege: never handed to a learning agent.
    #[inline]
    pub fn hidden_reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Sum of hidden rewards along a sequence of pairs, accumulated left to right.
    pub fn hidden_return(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().fold(0.0, |acc, &(s, a)| acc + self.hidden_reward(s, a))
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.initial, rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_index(self.transition_row(s, a), rng)
    }

    /// Time-indexed optimal values `v[t][s]` for `t = 0..=T` under the
    /// undiscounted hidden reward.
    pub fn optimal_values(&self) -> Vec<Vec<f64>> {
        let (ns, na, h) = (self.n_states, self.n_actions, self.horizon);
        let mut v = vec![vec![0.0; ns]; h + 1];
        for t in (0..h).rev() {
            for s in 0..ns {
                if self.terminal[s] {
                    continue;
                }
                v[t][s] = (0..na)
                    .map(|a| self.hidden_reward(s, a) + dot(self.transition_row(s, a), &v[t + 1]))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        v
    }

    /// Best achievable expected episodic return, by backward induction.
    pub fn optimal_return(&self) -> f64 {
        dot(&self.initial, &self.optimal_values()[0])
    }

    /// Expected episodic return of a stationary policy.
    pub fn policy_return(&self, policy: &TabularPolicy) -> f64 {
        let mut rho = self.initial.clone();
        let mut total = 0.0;
        for _ in 0..self.horizon {
            let mut next = vec![0.0; self.n_states];
            for s in 0..self.n_states {
                if self.terminal[s] || rho[s] == 0.0 {
                    continue;
                }
                for a in 0..self.n_actions {
                    let w = rho[s] * policy.prob(s, a);
                    if w == 0.0 {
                        continue;
                    }
                    total += w * self.hidden_reward(s, a);
                    for (n, p) in next.iter_mut().zip(self.transition_row(s, a)) {
                        *n += w * p;
                    }
                }
            }
            rho = next;
        }
        total
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse-CDF draw; falls back to the last positive entry on round-off.
pub(crate) fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Stationary state-conditioned action distribution `pi(a|s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "policy table",
                expected: n_states * n_actions,
                actual: probs.len(),
            });
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(row, &format!("policy row s={s}"))?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn deterministic(n_states: usize, n_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != n_states {
            return Err(Error::Dimension {
                context: "deterministic policy",
                expected: n_states,
                actual: actions.len(),
            });
        }
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::invalid(format!("action {a} out of range for state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// `pi(a|s) = exp(theta[s,a]) / sum_b exp(theta[s,b])`.
    pub fn softmax(n_states: usize, n_actions: usize, theta: &[f64]) -> Result<Self> {
        if theta.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "softmax logits",
                expected: n_states * n_actions,
                actual: theta.len(),
            });
        }
        let mut probs = Vec::with_capacity(theta.len());
        for row in theta.chunks(n_actions) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = e.iter().sum();
            probs.extend(e.into_iter().map(|x| x / z));
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Strictly positive random rows, so every action has nonzero mass.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let theta: Vec<f64> = (0..n_states * n_actions).map(|_| rng.gen_range(-1.5..1.5)).collect();
        Self::softmax(n_states, n_actions, &theta).expect("shape is consistent")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(s), rng)
    }

    pub(crate) fn check_shape(&self, mdp: &EnumeratedMdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::invalid(format!(
                "policy is {}x{} but the MDP has {} states and {} actions",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}
