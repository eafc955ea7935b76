//! Shipped negative controls. Each one is built to make a check fail.

use serde::Deserialize;

use crate::decomposition::scorer::{AdditiveScorer, SegmentScorer};
use crate::env::mdp::{EnumeratedMdp, TabularPolicy};
use crate::env::spec::EnvSpec;
use crate::env::trajectory::Pair;
use crate::error::{Error, Result};
use crate::theory::checks::{argmax_mismatches, check_qhat_offset};
use crate::theory::report::{TheoremReport, LEMMA_ARGMAX};

const ARGMAX_ACTION_OFFSET: &str = include_str!("../../fixtures/negative_controls/argmax_action_offset.toml");
const QHAT_RETURN_VIOLATION: &str = include_str!("../../fixtures/negative_controls/qhat_return_violation.toml");

/// Action values with an offset table that varies across actions.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgmaxFixture {
    pub n_actions: usize,
    pub q: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl ArgmaxFixture {
    pub fn shipped() -> Result<Self> {
        toml::from_str(ARGMAX_ACTION_OFFSET).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Mismatching states counted as the gap, tolerance 0.
    pub fn report(&self) -> Result<TheoremReport> {
        let shifted: Vec<f64> = self.q.iter().zip(&self.offsets).map(|(a, b)| a + b).collect();
        let n = argmax_mismatches(&self.q, &shifted, self.n_actions)? as f64;
        Ok(TheoremReport::new(LEMMA_ARGMAX, "action-dependent offsets", n, 0.0, 0.0).noted("negative control"))
    }
}

/// Exact partial sums of the hidden reward, plus `bonus` on any
/// full-horizon segment whose last action is `action`.
#[derive(Clone, Debug)]
pub struct ViolatingScorer {
    pub inner: AdditiveScorer,
    pub horizon: usize,
    pub action: usize,
    pub bonus: f64,
}

impl SegmentScorer for ViolatingScorer {
    /// (partial sum, length, last action)
    type State = (f64, usize, usize);

    fn start(&self) -> Self::State {
        (0.0, 0, 0)
    }

    fn push(&self, state: &mut Self::State, pair: Pair) {
        self.inner.push(&mut state.0, pair);
        state.1 += 1;
        state.2 = pair.1;
    }

    fn readout(&self, state: &Self::State) -> f64 {
        if state.1 == self.horizon && state.2 == self.action {
            state.0 + self.bonus
        } else {
            state.0
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QhatFixtureFile {
    bonus: f64,
    action: usize,
    mdp: EnvSpec,
}

/// An MDP with a scorer whose full-trajectory value differs from the true
/// return, under the uniform policy.
#[derive(Clone, Debug)]
pub struct QhatViolationFixture {
    pub mdp: EnumeratedMdp,
    pub policy: TabularPolicy,
    pub scorer: ViolatingScorer,
}

impl QhatViolationFixture {
    pub fn shipped() -> Result<Self> {
        let file: QhatFixtureFile = toml::from_str(QHAT_RETURN_VIOLATION).map_err(|e| Error::Parse(e.to_string()))?;
        let mdp = file.mdp.build()?.oracle_mdp().clone();
        if file.action >= mdp.n_actions() {
            return Err(Error::invalid(format!("fixture action {} out of range", file.action)));
        }
        let policy = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
        let scorer = ViolatingScorer {
            inner: AdditiveScorer::hidden_partial_sums(&mdp),
            horizon: mdp.horizon(),
            action: file.action,
            bonus: file.bonus,
        };
        Ok(Self { mdp, policy, scorer })
    }

    pub fn report(&self, tol: f64) -> Result<TheoremReport> {
        Ok(check_qhat_offset(&self.mdp, &self.policy, &self.scorer, tol)?.noted("negative control"))
    }
}

/// Both shipped controls; each report is expected to fail.
pub fn negative_controls(tol: f64) -> Result<Vec<TheoremReport>> {
    Ok(vec![
        ArgmaxFixture::shipped()?.report()?,
        QhatViolationFixture::shipped()?.report(tol)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_fixture_flips_both_states() {
        let r = ArgmaxFixture::shipped().unwrap().report().unwrap();
        assert_eq!(r.gap, 2.0);
        assert!(!r.pass);
    }

    #[test]
    fn qhat_fixture_spread_is_the_bonus() {
        // At t=1 the proxy reward is the hidden reward plus the bonus on
        // action 0, so Q-hat - Q is 1 for action 0 and 0 for action 1. At
        // t=0 both actions see the same continuation offset 0.5.
        let r = QhatViolationFixture::shipped().unwrap().report(1e-8).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-15, "{r:?}");
        assert_eq!((r.lhs, r.rhs), (1.0, 0.0));
        assert!(!r.pass);
    }

    #[test]
    fn controls_without_the_violation_pass() {
        let mut fx = QhatViolationFixture::shipped().unwrap();
        fx.scorer.bonus = 0.0;
        assert!(fx.report(1e-12).unwrap().pass);
        let mut ax = ArgmaxFixture::shipped().unwrap();
        ax.offsets = vec![0.7, 0.7, -0.2, -0.2];
        assert!(ax.report().unwrap().pass);
    }
}
