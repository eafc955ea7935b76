//! Exact-expectation checks on enumerable MDPs.
//!
//! Every expectation is computed twice by unrelated routes: forward
//! occupancy propagation on one side, explicit trajectory enumeration on the
//! other.

use crate::decomposition::oracle::ExactOracle;
use crate::decomposition::scorer::SegmentScorer;
use crate::env::enumerate::{enumeration_size, occupancies, propagate, DEFAULT_ENUMERATION_CAP};
use crate::env::mdp::{EnumeratedMdp, TabularPolicy};
use crate::env::trajectory::Pair;
use crate::error::{Error, Result};
use crate::rl::agent::argmax_set;
use crate::theory::report::{
    TheoremReport, LEMMA_POLICY_GRADIENT, QHAT_OFFSET, THEOREM1, THEOREM1_EXTENSION, THEOREM3,
};

/// A complete trajectory with its probability and every prefix score
/// `R(tau_0:k)` for `k = 0..=len`.
#[derive(Clone, Debug)]
pub struct ScoredTrajectory {
    pub pairs: Vec<Pair>,
    pub probability: f64,
    pub prefix_scores: Vec<f64>,
}

impl ScoredTrajectory {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `R(tau_0:k)` with `k` clipped to the episode length.
    pub fn score_upto(&self, k: usize) -> f64 {
        self.prefix_scores[k.min(self.pairs.len())]
    }
}

/// Everything the checks need about one `(mdp, policy, psi)` triple,
/// computed once.
pub struct ExactContext<'a> {
    mdp: &'a EnumeratedMdp,
    policy: &'a TabularPolicy,
    oracle: ExactOracle,
    trajectories: Vec<ScoredTrajectory>,
}

impl<'a> ExactContext<'a> {
    pub fn build<S: SegmentScorer>(mdp: &'a EnumeratedMdp, policy: &'a TabularPolicy, psi: &S) -> Result<Self> {
        let required = enumeration_size(mdp.n_states(), mdp.n_actions(), mdp.horizon());
        if required > DEFAULT_ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                required,
                cap: DEFAULT_ENUMERATION_CAP,
            });
        }
        let oracle = ExactOracle::build(mdp, policy, psi)?;
        let mut trajectories = Vec::new();
        let mut pairs = Vec::with_capacity(mdp.horizon());
        let mut scores = vec![0.0];
        let root = psi.start();
        for (s0, &p0) in mdp.initial().iter().enumerate() {
            if p0 > 0.0 {
                scored_walk(mdp, policy, psi, s0, p0, &root, &mut pairs, &mut scores, &mut trajectories);
            }
        }
        Ok(Self {
            mdp,
            policy,
            oracle,
            trajectories,
        })
    }

    pub fn oracle(&self) -> &ExactOracle {
        &self.oracle
    }

    pub fn trajectories(&self) -> &[ScoredTrajectory] {
        &self.trajectories
    }

    fn describe(&self) -> String {
        format!(
            "S={} A={} T={}",
            self.mdp.n_states(),
            self.mdp.n_actions(),
            self.mdp.horizon()
        )
    }

    /// `sum_a pi(a|s) r(s, a, t)`, zero where the oracle is undefined.
    fn expected_step_reward(&self, s: usize, t: usize) -> f64 {
        if !self.oracle.is_defined(s, t) {
            return 0.0;
        }
        (0..self.mdp.n_actions())
            .map(|a| self.policy.prob(s, a) * self.oracle.reward_or_zero(s, a, t))
            .sum()
    }

    /// Window identity: expected proxy reward over steps `t..t+h` against the
    /// expected growth of the prefix score over the same window.
    pub fn theorem1(&self, t: usize, h: usize, tol: f64) -> Result<TheoremReport> {
        let horizon = self.mdp.horizon();
        if h == 0 || t + h > horizon {
            return Err(Error::invalid(format!("window t={t} h={h} does not fit horizon {horizon}")));
        }
        let occ = self.oracle.occupancy();
        let mut lhs = 0.0;
        for (i, rho) in occ.iter().enumerate().skip(t).take(h) {
            for (s, &w) in rho.iter().enumerate() {
                if w > 0.0 && !self.mdp.is_terminal(s) {
                    lhs += w * self.expected_step_reward(s, i);
                }
            }
        }
        let rhs: f64 = self
            .trajectories
            .iter()
            .map(|tr| tr.probability * (tr.score_upto(t + h) - tr.score_upto(t)))
            .sum();
        let tag = if h == 1 { THEOREM1_EXTENSION } else { THEOREM1 };
        Ok(TheoremReport::new(tag, format!("{} t={t} h={h}", self.describe()), lhs, rhs, tol))
    }

    /// Every valid window, `h = 1` included.
    pub fn theorem1_all(&self, tol: f64) -> Result<Vec<TheoremReport>> {
        let horizon = self.mdp.horizon();
        let mut out = Vec::new();
        for t in 0..horizon {
            for h in 1..=horizon - t {
                out.push(self.theorem1(t, h, tol)?);
            }
        }
        Ok(out)
    }

    /// Whether `(s, a)` at step `t` has positive probability.
    pub fn is_reachable(&self, s: usize, a: usize, t: usize) -> bool {
        s < self.mdp.n_states()
            && a < self.mdp.n_actions()
            && !self.mdp.is_terminal(s)
            && self.oracle.is_defined(s, t)
            && self.policy.prob(s, a) > 0.0
    }

    /// Conditional identity: expected future proxy reward after `(s, a)` at
    /// step `t`, rolled forward through the dynamics, against the expected
    /// remaining growth of the prefix score over trajectories through
    /// `(s, a)` at `t`.
    pub fn theorem3(&self, s: usize, a: usize, t: usize, tol: f64) -> Result<TheoremReport> {
        if t >= self.mdp.horizon() {
            return Err(Error::invalid(format!("step {t} is not before horizon {}", self.mdp.horizon())));
        }
        if !self.is_reachable(s, a, t) {
            return Err(Error::UndefinedState { state: s, t });
        }
        let lhs = self.conditional_future_reward(s, a, t);
        let mut mass = 0.0;
        let mut acc = 0.0;
        for tr in &self.trajectories {
            if tr.len() > t && tr.pairs[t] == (s, a) {
                mass += tr.probability;
                acc += tr.probability * (tr.score_upto(tr.len()) - tr.score_upto(t + 1));
            }
        }
        let rhs = acc / mass;
        Ok(TheoremReport::new(
            THEOREM3,
            format!("{} s={s} a={a} t={t}", self.describe()),
            lhs,
            rhs,
            tol,
        ))
    }

    fn conditional_future_reward(&self, s: usize, a: usize, t: usize) -> f64 {
        let mut mu = self.mdp.transition_row(s, a).to_vec();
        let mut total = 0.0;
        for i in t + 1..self.mdp.horizon() {
            for (s2, &w) in mu.iter().enumerate() {
                if w > 0.0 && !self.mdp.is_terminal(s2) {
                    total += w * self.expected_step_reward(s2, i);
                }
            }
            mu = propagate(self.mdp, self.policy, &mu);
        }
        total
    }

    /// Every reachable `(s, a, t)`.
    pub fn theorem3_all(&self, tol: f64) -> Result<Vec<TheoremReport>> {
        let mut out = Vec::new();
        for t in 0..self.mdp.horizon() {
            for s in 0..self.mdp.n_states() {
                for a in 0..self.mdp.n_actions() {
                    if self.is_reachable(s, a, t) {
                        out.push(self.theorem3(s, a, t, tol)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn scored_walk<S: SegmentScorer>(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    psi: &S,
    s: usize,
    p: f64,
    state: &S::State,
    pairs: &mut Vec<Pair>,
    scores: &mut Vec<f64>,
    out: &mut Vec<ScoredTrajectory>,
) {
    if mdp.is_terminal(s) || pairs.len() == mdp.horizon() {
        out.push(ScoredTrajectory {
            pairs: pairs.clone(),
            probability: p,
            prefix_scores: scores.clone(),
        });
        return;
    }
    for a in 0..mdp.n_actions() {
        let pa = p * policy.prob(s, a);
        if pa == 0.0 {
            continue;
        }
        let mut next_state = state.clone();
        psi.push(&mut next_state, (s, a));
        pairs.push((s, a));
        scores.push(psi.readout(&next_state));
        for (next, &pn) in mdp.transition_row(s, a).iter().enumerate() {
            if pn > 0.0 {
                scored_walk(mdp, policy, psi, next, pa * pn, &next_state, pairs, scores, out);
            }
        }
        pairs.pop();
        scores.pop();
    }
}

pub fn check_theorem1<S: SegmentScorer>(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    psi: &S,
    t: usize,
    h: usize,
    tol: f64,
) -> Result<TheoremReport> {
    ExactContext::build(mdp, policy, psi)?.theorem1(t, h, tol)
}

pub fn check_theorem3<S: SegmentScorer>(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    psi: &S,
    s: usize,
    a: usize,
    t: usize,
    tol: f64,
) -> Result<TheoremReport> {
    ExactContext::build(mdp, policy, psi)?.theorem3(s, a, t, tol)
}

fn check_table(q: &[f64], n_actions: usize, other: usize, context: &'static str) -> Result<usize> {
    if n_actions == 0 || !q.len().is_multiple_of(n_actions) {
        return Err(Error::invalid(format!("table of length {} is not a multiple of {n_actions}", q.len())));
    }
    if other != q.len() {
        return Err(Error::Dimension {
            context,
            expected: q.len(),
            actual: other,
        });
    }
    Ok(q.len() / n_actions)
}

/// Number of states whose greedy action set differs between two tables.
pub fn argmax_mismatches(q: &[f64], shifted: &[f64], n_actions: usize) -> Result<usize> {
    check_table(q, n_actions, shifted.len(), "shifted table")?;
    Ok(q
        .chunks(n_actions)
        .zip(shifted.chunks(n_actions))
        .filter(|(a, b)| argmax_set(a) != argmax_set(b))
        .count())
}

/// True iff adding the per-state offset `delta[s]` to every action leaves
/// each state's greedy action set unchanged.
pub fn check_lemma_argmax(q: &[f64], n_actions: usize, delta: &[f64]) -> Result<bool> {
    if n_actions == 0 {
        return Err(Error::invalid("no actions"));
    }
    if delta.len() * n_actions != q.len() {
        return Err(Error::Dimension {
            context: "state offsets",
            expected: q.len() / n_actions,
            actual: delta.len(),
        });
    }
    let shifted: Vec<f64> = q.iter().enumerate().map(|(i, &v)| v + delta[i / n_actions]).collect();
    Ok(argmax_mismatches(q, &shifted, n_actions)? == 0)
}

/// Same comparison with a full `(s, a)` offset table.
pub fn check_argmax_with_offsets(q: &[f64], n_actions: usize, offsets: &[f64]) -> Result<bool> {
    check_table(q, n_actions, offsets.len(), "action offsets")?;
    let shifted: Vec<f64> = q.iter().zip(offsets).map(|(a, b)| a + b).collect();
    Ok(argmax_mismatches(q, &shifted, n_actions)? == 0)
}

/// Entry `[t][s, a]` of a table that is either stationary (`S*A` long) or
/// time-indexed (`T*S*A` long).
fn lookup(table: &[f64], width: usize, t: usize, i: usize) -> f64 {
    if table.len() == width {
        table[i]
    } else {
        table[t * width + i]
    }
}

/// Exact `sum_t E_{s ~ rho_t, a ~ pi}[grad_theta log pi(a|s) * value(s, a, t)]`
/// for a tabular softmax policy.
pub fn policy_gradient(
    mdp: &EnumeratedMdp,
    theta: &[f64],
    value: impl Fn(usize, usize, usize) -> f64,
) -> Result<Vec<f64>> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let policy = TabularPolicy::softmax(ns, na, theta)?;
    let occ = occupancies(mdp, &policy)?;
    let mut grad = vec![0.0; ns * na];
    for (t, rho) in occ.iter().take(mdp.horizon()).enumerate() {
        for (s, &w) in rho.iter().enumerate() {
            if w == 0.0 || mdp.is_terminal(s) {
                continue;
            }
            let pi = policy.row(s);
            for a in 0..na {
                let v = w * pi[a] * value(s, a, t);
                // d log pi(a|s) / d theta[s, b] = 1[a = b] - pi(b|s)
                for b in 0..na {
                    let score = if a == b { 1.0 } else { 0.0 } - pi[b];
                    grad[s * na + b] += v * score;
                }
            }
        }
    }
    Ok(grad)
}

/// Policy gradients under `Q` and under `Q + delta(s)` agree. `q` may be
/// stationary (`S*A`) or time-indexed (`T*S*A`); `delta` likewise (`S` or
/// `T*S`). The report holds both gradients' max-norms and the max-norm of
/// their difference.
pub fn check_lemma_policy_gradient(
    mdp: &EnumeratedMdp,
    theta: &[f64],
    q: &[f64],
    delta: &[f64],
    tol: f64,
) -> Result<TheoremReport> {
    let (ns, na, h) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    if q.len() != ns * na && q.len() != h * ns * na {
        return Err(Error::Dimension {
            context: "action values",
            expected: ns * na,
            actual: q.len(),
        });
    }
    if delta.len() != ns && delta.len() != h * ns {
        return Err(Error::Dimension {
            context: "state offsets",
            expected: ns,
            actual: delta.len(),
        });
    }
    let plain = policy_gradient(mdp, theta, |s, a, t| lookup(q, ns * na, t, s * na + a))?;
    let shifted = policy_gradient(mdp, theta, |s, a, t| {
        lookup(q, ns * na, t, s * na + a) + lookup(delta, ns, t, s)
    })?;
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = plain.iter().zip(&shifted).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(TheoremReport::with_gap(
        LEMMA_POLICY_GRADIENT,
        format!("S={ns} A={na} T={h}"),
        norm(&shifted),
        norm(&plain),
        gap,
        tol,
    ))
}

/// Finite-horizon action values `Q_t(s, a)` under `policy` for an arbitrary
/// step reward, laid out `[(t * S + s) * A + a]`.
pub fn policy_action_values(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    reward: impl Fn(usize, usize, usize) -> f64,
) -> Vec<f64> {
    let (ns, na, h) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let mut q = vec![0.0; h * ns * na];
    let mut v_next = vec![0.0; ns];
    for t in (0..h).rev() {
        let mut v = vec![0.0; ns];
        for s in 0..ns {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..na {
                let cont: f64 = mdp.transition_row(s, a).iter().zip(&v_next).map(|(p, x)| p * x).sum();
                let val = reward(s, a, t) + cont;
                q[(t * ns + s) * na + a] = val;
                v[s] += policy.prob(s, a) * val;
            }
        }
        v_next = v;
    }
    q
}

/// `Q-hat - Q` is constant across actions at every `(s, t)` where the proxy
/// reward is defined. `Q-hat` uses the exact proxy reward of `psi`; `Q` the
/// hidden reward. The caller supplies `psi` with whatever full-trajectory
/// correction is intended. Reports the largest action spread; `lhs`/`rhs`
/// are the max and min of the difference at the worst `(s, t)`.
pub fn check_qhat_offset<S: SegmentScorer>(
    mdp: &EnumeratedMdp,
    policy: &TabularPolicy,
    psi: &S,
    tol: f64,
) -> Result<TheoremReport> {
    let oracle = ExactOracle::build(mdp, policy, psi)?;
    let (ns, na, h) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let qhat = policy_action_values(mdp, policy, |s, a, t| oracle.reward_or_zero(s, a, t));
    let q = policy_action_values(mdp, policy, |s, a, _| mdp.hidden_reward(s, a));
    let mut worst = (0.0, 0.0, 0.0, 0, 0);
    let mut skipped = 0usize;
    for t in 0..h {
        for s in 0..ns {
            if mdp.is_terminal(s) {
                continue;
            }
            if !oracle.is_defined(s, t) {
                skipped += 1;
                continue;
            }
            let base = (t * ns + s) * na;
            let diffs = (0..na).map(|a| qhat[base + a] - q[base + a]);
            let (lo, hi) = diffs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            let spread = hi - lo;
            if spread.is_nan() || spread > worst.0 {
                worst = (spread, hi, lo, s, t);
            }
        }
    }
    let (spread, hi, lo, s, t) = worst;
    let report = TheoremReport::with_gap(
        QHAT_OFFSET,
        format!("S={ns} A={na} T={h} worst s={s} t={t}"),
        hi,
        lo,
        spread,
        tol,
    );
    Ok(if skipped > 0 {
        report.noted(format!("{skipped} unreachable (s, t) skipped"))
    } else {
        report
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::scorer::{AdditiveScorer, FnScorer, ReturnCorrected};
    use crate::env::roster::{random_mdp, RandomMdpOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, ns: usize, na: usize, h: usize, n_terminal: usize) -> (EnumeratedMdp, TabularPolicy) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = RandomMdpOptions {
            sparsity: 0.3,
            n_terminal,
            reward_scale: 1.0,
        };
        let mdp = random_mdp(ns, na, h, opts, &mut rng).unwrap();
        let pol = TabularPolicy::random(ns, na, &mut rng);
        (mdp, pol)
    }

    /// Lookup-table scorer: every distinct segment gets its own value.
    fn table_scorer(seed: u64) -> FnScorer<impl Fn(&[Pair]) -> f64> {
        FnScorer(move |seg: &[Pair]| {
            let mut hsh = seed ^ 0x9e37_79b9_7f4a_7c15;
            for &(s, a) in seg {
                hsh = crate::rl::eval::derive_seed(hsh, (s * 7 + a) as u64);
            }
            (hsh >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn zero_scorer_gives_zero_sides() {
        let (mdp, pol) = random_instance(1, 3, 2, 4, 0);
        let zero = FnScorer(|_: &[Pair]| 0.0);
        let ctx = ExactContext::build(&mdp, &pol, &zero).unwrap();
        for r in ctx.theorem1_all(1e-12).unwrap() {
            assert_eq!((r.lhs, r.rhs, r.gap), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn point_mass_equals_single_difference() {
        // One state, one action: the only trajectory is (0,0)^T.
        let mdp = EnumeratedMdp::new(1, 1, 4, vec![1.0], vec![0.0], vec![1.0], vec![false]).unwrap();
        let pol = TabularPolicy::uniform(1, 1);
        let psi = FnScorer(|seg: &[Pair]| (seg.len() * seg.len()) as f64);
        let r = check_theorem1(&mdp, &pol, &psi, 1, 2, 1e-12).unwrap();
        // R(tau_0:3) - R(tau_0:1) = 9 - 1.
        assert_eq!(r.rhs, 8.0);
        assert!(r.gap < 1e-12);
        let r3 = check_theorem3(&mdp, &pol, &psi, 0, 0, 1, 1e-12).unwrap();
        // R(tau_0:4) - R(tau_0:2) = 16 - 4.
        assert_eq!(r3.rhs, 12.0);
        assert!(r3.gap < 1e-12);
    }

    #[test]
    fn theorem1_holds_for_arbitrary_scorer() {
        for seed in 0..5 {
            let (mdp, pol) = random_instance(seed, 4, 2, 5, (seed % 2) as usize);
            let psi = table_scorer(seed);
            let ctx = ExactContext::build(&mdp, &pol, &psi).unwrap();
            let reports = ctx.theorem1_all(1e-8).unwrap();
            assert_eq!(reports.len(), 15);
            for r in reports {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn theorem3_last_step_is_zero_on_both_sides() {
        let (mdp, pol) = random_instance(4, 3, 2, 3, 0);
        let ctx = ExactContext::build(&mdp, &pol, &table_scorer(4)).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                if ctx.is_reachable(s, a, 2) {
                    let r = ctx.theorem3(s, a, 2, 0.0).unwrap();
                    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn theorem3_holds_for_additive_scorer() {
        for seed in 0..5 {
            let (mdp, pol) = random_instance(seed, 4, 2, 5, (seed % 2) as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let psi = AdditiveScorer {
                n_actions: 2,
                table: (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let ctx = ExactContext::build(&mdp, &pol, &psi).unwrap();
            for r in ctx.theorem3_all(1e-8).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn theorem3_hand_counterexample() {
        // Two start states with equal mass, everything moves to state 0, T=2.
        // R((s0,a)) = 0 and R((s0,a),(0,a)) = s0. At (0, 0, 0) the proxy
        // reward at step 1 averages over both prefixes (0.5); the conditional
        // right side only sees prefix s0 = 0 (0).
        let mdp =
            EnumeratedMdp::new(2, 1, 2, vec![1.0, 0.0, 1.0, 0.0], vec![0.0; 2], vec![0.5, 0.5], vec![false; 2]).unwrap();
        let pol = TabularPolicy::uniform(2, 1);
        let psi = FnScorer(|seg: &[Pair]| if seg.len() == 2 { seg[0].0 as f64 } else { 0.0 });
        let r = check_theorem3(&mdp, &pol, &psi, 0, 0, 0, 1e-8).unwrap();
        assert_eq!((r.lhs, r.rhs, r.gap), (0.5, 0.0, 0.5));
        assert!(!r.pass);
    }

    #[test]
    fn unreachable_pairs_are_undefined() {
        let mdp =
            EnumeratedMdp::new(2, 1, 2, vec![1.0, 0.0, 1.0, 0.0], vec![0.0; 2], vec![1.0, 0.0], vec![false; 2]).unwrap();
        let pol = TabularPolicy::uniform(2, 1);
        let zero = FnScorer(|_: &[Pair]| 0.0);
        assert!(matches!(
            check_theorem3(&mdp, &pol, &zero, 1, 0, 0, 1e-8),
            Err(Error::UndefinedState { state: 1, t: 0 })
        ));
    }

    #[test]
    fn large_instances_are_refused() {
        let (mdp, pol) = random_instance(0, 6, 3, 6, 0);
        let zero = FnScorer(|_: &[Pair]| 0.0);
        assert!(matches!(
            check_theorem1(&mdp, &pol, &zero, 0, 2, 1e-8),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn argmax_state_offsets_and_action_offsets() {
        let q = [1.0, 1.0, 0.0, 0.0, 0.5, -2.0];
        assert!(check_lemma_argmax(&q, 2, &[0.0; 3]).unwrap());
        assert!(check_lemma_argmax(&q, 2, &[5.0, -3.0, 0.25]).unwrap());
        assert!(!check_argmax_with_offsets(&q, 2, &[0.0, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(check_lemma_argmax(&q, 2, &[0.0; 2]).is_err());
    }

    #[test]
    fn policy_gradient_offsets_cancel() {
        let (mdp, _) = random_instance(9, 3, 3, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..4 * 9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zero = check_lemma_policy_gradient(&mdp, &theta, &q, &[0.0; 3], 0.0).unwrap();
        assert_eq!(zero.gap, 0.0);
        let constant = check_lemma_policy_gradient(&mdp, &[0.0; 9], &q, &[2.5; 3], 1e-10).unwrap();
        assert!(constant.pass, "{constant:?}");
        let delta: Vec<f64> = (0..4 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = check_lemma_policy_gradient(&mdp, &theta, &q, &delta, 1e-8).unwrap();
        assert!(r.pass && r.rhs > 0.0, "{r:?}");
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let (mdp, _) = random_instance(2, 3, 2, 3, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // The score-function form equals dJ/dtheta for a one-step horizon,
        // where no later state depends on theta.
        let mdp1 = mdp.clone().with_horizon(1).unwrap();
        let g = policy_gradient(&mdp1, &theta, |s, a, _| q[s * 2 + a]).unwrap();
        let objective1 = |th: &[f64]| {
            let pol = TabularPolicy::softmax(3, 2, th).unwrap();
            (0..3)
                .map(|s| mdp1.initial()[s] * (0..2).map(|a| pol.prob(s, a) * q[s * 2 + a]).sum::<f64>())
                .sum::<f64>()
        };
        let eps = 1e-6;
        for i in 0..6 {
            let mut up = theta.clone();
            up[i] += eps;
            let mut dn = theta.clone();
            dn[i] -= eps;
            let fd = (objective1(&up) - objective1(&dn)) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn qhat_offset_perfect_decomposition_is_zero() {
        let (mdp, pol) = random_instance(5, 4, 2, 4, 1);
        let psi = AdditiveScorer::hidden_partial_sums(&mdp);
        let r = check_qhat_offset(&mdp, &pol, &psi, 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        let (mdp0, pol0) = random_instance(6, 4, 2, 4, 0);
        let psi0 = AdditiveScorer::hidden_partial_sums(&mdp0);
        let corrected0 = ReturnCorrected { inner: &psi0, mdp: &mdp0 };
        assert!(check_qhat_offset(&mdp0, &pol0, &corrected0, 1e-12).unwrap().pass);
    }

    #[test]
    fn qhat_offset_flags_uncorrected_scorer() {
        let (mdp, pol) = random_instance(7, 3, 2, 3, 0);
        let r = check_qhat_offset(&mdp, &pol, &table_scorer(7), 1e-8).unwrap();
        assert!(!r.pass);
    }
}
