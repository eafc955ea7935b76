//! Randomized battery over small enumerable instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::scorer::{AdditiveScorer, ReturnCorrected};
use crate::decomposition::subtraj::SubTrajRewardModel;
use crate::env::enumerate::enumeration_size;
use crate::env::mdp::{EnumeratedMdp, TabularPolicy};
use crate::env::roster::{random_mdp, RandomMdpOptions};
use crate::env::trajectory::PairEncoder;
use crate::error::{Error, Result};
use crate::rl::eval::derive_seed;
use crate::theory::checks::{check_lemma_argmax, check_lemma_policy_gradient, check_qhat_offset, ExactContext};
use crate::theory::report::{summarize, TagSummary, TheoremReport, LEMMA_ARGMAX, QHAT_OFFSET_PERFECT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub instances: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_horizon: usize,
    /// Horizon is shortened until `(S*A)^T` fits under this.
    pub enumeration_budget: u128,
    pub psi_hidden: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            seed: 0,
            tol: 1e-8,
            max_states: 6,
            max_actions: 3,
            max_horizon: 6,
            enumeration_budget: 200_000,
            psi_hidden: 8,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::config("instances", "must be at least 1"));
        }
        if self.max_states < 2 || self.max_actions < 1 || self.max_horizon < 1 {
            return Err(Error::config("max_states", "need at least 2 states, 1 action and horizon 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::config("tol", "must be non-negative"));
        }
        if self.psi_hidden == 0 {
            return Err(Error::config("psi_hidden", "must be at least 1"));
        }
        Ok(())
    }
}

/// Shape of one sampled instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceShape {
    pub seed: u64,
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub n_terminal: usize,
}

/// A sampled instance: MDP, strictly positive random policy and a freshly
/// initialised recurrent scorer.
pub struct Instance {
    pub shape: InstanceShape,
    pub mdp: EnumeratedMdp,
    pub policy: TabularPolicy,
    pub psi: SubTrajRewardModel,
    rng: ChaCha8Rng,
}

pub fn sample_instance(cfg: &BatteryConfig, index: usize) -> Result<Instance> {
    let seed = derive_seed(cfg.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_states = rng.gen_range(2..=cfg.max_states);
    let n_actions = rng.gen_range(1..=cfg.max_actions);
    let mut horizon = rng.gen_range(1..=cfg.max_horizon);
    while horizon > 1 && enumeration_size(n_states, n_actions, horizon) > cfg.enumeration_budget {
        horizon -= 1;
    }
    let n_terminal = if n_states >= 3 { rng.gen_range(0..=1) } else { 0 };
    let opts = RandomMdpOptions {
        sparsity: rng.gen_range(0.0..0.5),
        n_terminal,
        reward_scale: 1.0,
    };
    let mdp = random_mdp(n_states, n_actions, horizon, opts, &mut rng)?;
    let policy = TabularPolicy::random(n_states, n_actions, &mut rng);
    let psi = SubTrajRewardModel::new("psi", PairEncoder::new(n_states, n_actions), cfg.psi_hidden, &mut rng);
    Ok(Instance {
        shape: InstanceShape {
            seed,
            n_states,
            n_actions,
            horizon,
            n_terminal,
        },
        mdp,
        policy,
        psi,
        rng,
    })
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Every check on one instance.
pub fn run_instance(cfg: &BatteryConfig, index: usize) -> Result<Vec<TheoremReport>> {
    let Instance {
        shape,
        mdp,
        policy,
        psi,
        mut rng,
    } = sample_instance(cfg, index)?;
    let (ns, na, h) = (shape.n_states, shape.n_actions, shape.horizon);
    let suffix = format!(" terminal={} #{index}", shape.n_terminal);
    let mut out = Vec::new();

    let ctx = ExactContext::build(&mdp, &policy, &psi)?;
    out.extend(ctx.theorem1_all(cfg.tol)?);
    out.extend(ctx.theorem3_all(cfg.tol)?);

    // Values on a 0.1 grid so that tied maxima occur.
    let q: Vec<f64> = (0..ns * na).map(|_| rng.gen_range(-10i32..=10) as f64 / 10.0).collect();
    let delta = uniform(&mut rng, ns);
    let same = check_lemma_argmax(&q, na, &delta)?;
    let mismatches = if same { 0.0 } else { 1.0 };
    out.push(TheoremReport::new(LEMMA_ARGMAX, format!("S={ns} A={na}"), mismatches, 0.0, 0.0));

    let theta = uniform(&mut rng, ns * na);
    let qt = uniform(&mut rng, h * ns * na);
    let dt = uniform(&mut rng, h * ns);
    out.push(check_lemma_policy_gradient(&mdp, &theta, &qt, &dt, cfg.tol)?);

    let perfect = AdditiveScorer::hidden_partial_sums(&mdp);
    let mut r = check_qhat_offset(&mdp, &policy, &perfect, cfg.tol)?;
    r.tag = QHAT_OFFSET_PERFECT.to_string();
    out.push(r);
    if shape.n_terminal == 0 {
        let corrected = ReturnCorrected { inner: &psi, mdp: &mdp };
        out.push(check_qhat_offset(&mdp, &policy, &corrected, cfg.tol)?.noted("descriptive"));
    }

    for r in &mut out {
        r.instance.push_str(&suffix);
        r.seed = Some(shape.seed);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryReport {
    pub config: BatteryConfig,
    pub records: Vec<TheoremReport>,
}

impl BatteryReport {
    pub fn summary(&self) -> Vec<TagSummary> {
        summarize(&self.records)
    }

    /// Whether every record with this tag passed (and at least one exists).
    pub fn tag_passes(&self, tag: &str) -> bool {
        self.summary().iter().any(|s| s.tag == tag && s.all_pass())
    }

    pub fn failures(&self) -> impl Iterator<Item = &TheoremReport> {
        self.records.iter().filter(|r| !r.pass)
    }
}

/// Runs instances in parallel; records come back in instance order.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryReport> {
    cfg.validate()?;
    let per_instance: Vec<Vec<TheoremReport>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| run_instance(cfg, i))
        .collect::<Result<_>>()?;
    Ok(BatteryReport {
        config: cfg.clone(),
        records: per_instance.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::report::{LEMMA_POLICY_GRADIENT, THEOREM1, THEOREM1_EXTENSION};

    fn small() -> BatteryConfig {
        BatteryConfig {
            instances: 6,
            max_states: 4,
            max_horizon: 4,
            ..BatteryConfig::default()
        }
    }

    #[test]
    fn instances_respect_bounds() {
        let cfg = BatteryConfig::default();
        for i in 0..50 {
            let inst = sample_instance(&cfg, i).unwrap();
            let s = inst.shape;
            assert!((2..=6).contains(&s.n_states) && (1..=3).contains(&s.n_actions));
            assert!((1..=6).contains(&s.horizon));
            assert!(enumeration_size(s.n_states, s.n_actions, s.horizon) <= cfg.enumeration_budget || s.horizon == 1);
        }
    }

    #[test]
    fn battery_is_deterministic_and_exact_checks_pass() {
        let a = run_battery(&small()).unwrap();
        let b = run_battery(&small()).unwrap();
        assert_eq!(a.records, b.records);
        for tag in [THEOREM1_EXTENSION, LEMMA_ARGMAX, LEMMA_POLICY_GRADIENT, QHAT_OFFSET_PERFECT] {
            assert!(a.tag_passes(tag), "{tag}: {:?}", a.summary());
        }
        assert!(a.records.iter().filter(|r| r.tag == THEOREM1).all(|r| r.pass));
        assert!(a.records.iter().all(|r| r.seed.is_some()));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = BatteryConfig {
            instances: 0,
            ..BatteryConfig::default()
        };
        assert!(run_battery(&cfg).is_err());
    }
}
