//! Return-decomposition and step-reward regression losses.

use crate::decomposition::scorer::SegmentScorer;
use crate::decomposition::step::StepRewardModel;
use crate::decomposition::subtraj::{SubTrajRewardModel, SubTrajVars};
use crate::env::trajectory::{Pair, Trajectory};
use crate::error::{Error, Result};
use crate::nn::graph::{Graph, Var};
use crate::nn::param::{Grads, Module};

/// `[0, cuts..., len]` after checking the cuts lie strictly inside `(0, len)`
/// and increase strictly.
pub fn multicut_bounds(len: usize, cuts: &[usize]) -> Result<Vec<usize>> {
    let mut prev = 0;
    for &c in cuts {
        if c <= prev || c >= len {
            return Err(Error::invalid(format!(
                "cut points {cuts:?} must increase strictly inside (0, {len})"
            )));
        }
        prev = c;
    }
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cuts);
    bounds.push(len);
    Ok(bounds)
}

/// Sum of segment scores between consecutive bounds, minus the episodic return.
pub fn segments_residual<S: SegmentScorer>(psi: &S, traj: &Trajectory, bounds: &[usize]) -> f64 {
    let pairs = traj.pairs();
    let mut total = 0.0;
    for w in bounds.windows(2) {
        total += psi.score(&pairs[w[0]..w[1]]);
    }
    total - traj.episodic_return
}

/// `(R(tau_0:c) + R(tau_c:T) - R_ep)^2` for `0 <= c <= T`.
pub fn return_loss<S: SegmentScorer>(psi: &S, traj: &Trajectory, c: usize) -> Result<f64> {
    if c > traj.len() {
        return Err(Error::invalid(format!("cut {c} beyond trajectory length {}", traj.len())));
    }
    let r = segments_residual(psi, traj, &[0, c, traj.len()]);
    Ok(r * r)
}

/// Squared residual of the sum of `cuts.len() + 1` segment scores.
pub fn multicut_return_loss<S: SegmentScorer>(psi: &S, traj: &Trajectory, cuts: &[usize]) -> Result<f64> {
    let bounds = multicut_bounds(traj.len(), cuts)?;
    let r = segments_residual(psi, traj, &bounds);
    Ok(r * r)
}

/// `R(tau_0:t+1) - R(tau_0:t)` for every `t`.
pub fn step_targets<S: SegmentScorer>(psi: &S, pairs: &[Pair]) -> Vec<f64> {
    let p = psi.prefix_scores(pairs);
    p.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `(r(s_t, a_t) - (R(tau_0:t+1) - R(tau_0:t)))^2`.
pub fn step_loss<S: SegmentScorer>(phi: &StepRewardModel, psi: &S, traj: &Trajectory, t: usize) -> Result<f64> {
    if t >= traj.len() {
        return Err(Error::invalid(format!("step {t} outside trajectory of length {}", traj.len())));
    }
    let pairs = traj.pairs();
    let target = psi.score(&pairs[..t + 1]) - psi.score(&pairs[..t]);
    let d = phi.reward(pairs[t], t) - target;
    Ok(d * d)
}

/// Squared residual for one trajectory on a graph, `None` if it has no
/// nonempty segment.
pub fn residual_graph(
    g: &mut Graph,
    psi: &SubTrajRewardModel,
    vars: &SubTrajVars,
    traj: &Trajectory,
    bounds: &[usize],
) -> Option<Var> {
    let pairs = traj.pairs();
    let segs: Vec<Var> = bounds
        .windows(2)
        .filter_map(|w| psi.segment_graph(g, vars, &pairs[w[0]..w[1]]))
        .collect();
    if segs.is_empty() {
        return None;
    }
    let total = g.add_all(&segs);
    let target = g.scalar(traj.episodic_return);
    let r = g.sub(total, target);
    Some(g.square(r))
}

/// Mean squared residual over a batch and its gradient with respect to psi.
pub fn batch_return_loss(psi: &SubTrajRewardModel, batch: &[(&Trajectory, Vec<usize>)]) -> Result<(f64, Grads)> {
    let mut g = Graph::new();
    let vars = psi.bind(&mut g);
    let terms: Vec<Var> = batch
        .iter()
        .filter_map(|(traj, bounds)| residual_graph(&mut g, psi, &vars, traj, bounds))
        .collect();
    if terms.is_empty() {
        return Err(Error::invalid("batch contains no nonempty trajectory"));
    }
    let sum = g.add_all(&terms);
    let loss = g.scale(sum, 1.0 / batch.len() as f64);
    let grads = g.backward(loss)?;
    Ok((g.scalar_value(loss), grads))
}

/// Mean step loss over `(trajectory, step, target)` triples and its gradient
/// with respect to phi. Targets come from a frozen psi.
pub fn batch_step_loss(phi: &StepRewardModel, items: &[(Pair, usize, f64)]) -> Result<(f64, Grads)> {
    if items.is_empty() {
        return Err(Error::invalid("empty step-loss batch"));
    }
    let mut g = Graph::new();
    let vars = phi.bind(&mut g);
    let mut terms = Vec::with_capacity(items.len());
    for &(pair, t, target) in items {
        let y = phi.reward_graph(&mut g, &vars, pair, t);
        let c = g.scalar(target);
        let d = g.sub(y, c);
        terms.push(g.square(d));
    }
    let sum = g.add_all(&terms);
    let loss = g.scale(sum, 1.0 / items.len() as f64);
    let grads = g.backward(loss)?;
    Ok((g.scalar_value(loss), grads))
}

/// Step loss with both models bound on one graph; psi enters only through
/// detached nodes. Gradients are returned psi-first, then phi.
pub fn joint_step_loss(
    phi: &StepRewardModel,
    psi: &SubTrajRewardModel,
    traj: &Trajectory,
    t: usize,
) -> Result<(f64, Grads, Grads)> {
    if t >= traj.len() {
        return Err(Error::invalid(format!("step {t} outside trajectory of length {}", traj.len())));
    }
    let pairs = traj.pairs();
    let mut g = Graph::new();
    let pv = psi.bind(&mut g);
    let fv = phi.bind(&mut g);
    let prefixes = psi.prefix_graph(&mut g, &pv, &pairs[..t + 1]);
    let after = g.detach(prefixes[t]);
    let target = if t == 0 {
        after
    } else {
        let before = g.detach(prefixes[t - 1]);
        g.sub(after, before)
    };
    let y = phi.reward_graph(&mut g, &fv, pairs[t], t);
    let d = g.sub(y, target);
    let loss = g.square(d);
    let mut grads = g.backward(loss)?;
    let phi_grads = grads.split_off(psi.params().len());
    Ok((g.scalar_value(loss), grads, phi_grads))
}

/// RRD loss: `(mean_{i in idx} r(s_i, a_i) - R_ep / T)^2` where `T` is the
/// trajectory length.
pub fn rrd_loss(phi: &StepRewardModel, traj: &Trajectory, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() || traj.is_empty() {
        return Err(Error::invalid("rrd loss needs a nonempty subsequence"));
    }
    let mean = idx.iter().map(|&i| phi.reward(traj.pair(i), i)).sum::<f64>() / idx.len() as f64;
    let d = mean - traj.episodic_return / traj.len() as f64;
    Ok(d * d)
}

/// Mean RRD loss over sampled subsequences, with gradient.
pub fn batch_rrd_loss(phi: &StepRewardModel, batch: &[(&Trajectory, Vec<usize>)]) -> Result<(f64, Grads)> {
    let mut g = Graph::new();
    let vars = phi.bind(&mut g);
    let mut terms = Vec::with_capacity(batch.len());
    for (traj, idx) in batch {
        if idx.is_empty() {
            continue;
        }
        let outs: Vec<Var> = idx
            .iter()
            .map(|&i| phi.reward_graph(&mut g, &vars, traj.pair(i), i))
            .collect();
        let s = g.add_all(&outs);
        let mean = g.scale(s, 1.0 / idx.len() as f64);
        let c = g.scalar(traj.episodic_return / traj.len() as f64);
        let d = g.sub(mean, c);
        terms.push(g.square(d));
    }
    if terms.is_empty() {
        return Err(Error::invalid("rrd batch has no nonempty subsequence"));
    }
    let sum = g.add_all(&terms);
    let loss = g.scale(sum, 1.0 / terms.len() as f64);
    let grads = g.backward(loss)?;
    Ok((g.scalar_value(loss), grads))
}

/// Per-prefix return regression for the recurrent predictor:
/// mean over trajectories of `mean_t (g(tau_0:t+1) - R_ep)^2`.
pub fn batch_prefix_regression(g_model: &SubTrajRewardModel, batch: &[&Trajectory]) -> Result<(f64, Grads)> {
    let mut g = Graph::new();
    let vars = g_model.bind(&mut g);
    let mut terms = Vec::with_capacity(batch.len());
    for traj in batch {
        if traj.is_empty() {
            continue;
        }
        let outs = g_model.prefix_graph(&mut g, &vars, &traj.pairs());
        let target = g.scalar(traj.episodic_return);
        let sq: Vec<Var> = outs
            .iter()
            .map(|&o| {
                let d = g.sub(o, target);
                g.square(d)
            })
            .collect();
        let s = g.add_all(&sq);
        terms.push(g.scale(s, 1.0 / sq.len() as f64));
    }
    if terms.is_empty() {
        return Err(Error::invalid("prefix regression batch has no nonempty trajectory"));
    }
    let sum = g.add_all(&terms);
    let loss = g.scale(sum, 1.0 / terms.len() as f64);
    let grads = g.backward(loss)?;
    Ok((g.scalar_value(loss), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::scorer::{AdditiveScorer, FnScorer};
    use crate::env::trajectory::PairEncoder;
    use crate::nn::param::Module;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn traj(r: f64) -> Trajectory {
        Trajectory::from_pairs(&[(0, 1), (1, 0), (2, 1)], 3, r).unwrap()
    }

    #[test]
    fn zero_model_return_loss() {
        let zero = FnScorer(|_: &[Pair]| 0.0);
        assert_eq!(return_loss(&zero, &traj(2.0), 1).unwrap(), 4.0);
    }

    #[test]
    fn boundary_cuts_use_empty_segment() {
        let full = FnScorer(|seg: &[Pair]| if seg.len() == 3 { 5.0 } else { 100.0 });
        assert_eq!(return_loss(&full, &traj(5.0), 3).unwrap(), 0.0);
        assert_eq!(return_loss(&full, &traj(5.0), 0).unwrap(), 0.0);
        assert!(return_loss(&full, &traj(5.0), 4).is_err());
    }

    #[test]
    fn multicut_zero_cuts_regresses_whole_trajectory() {
        let sc = FnScorer(|seg: &[Pair]| seg.len() as f64 * 0.5);
        let t = traj(2.0);
        assert_eq!(multicut_return_loss(&sc, &t, &[]).unwrap(), (1.5f64 - 2.0).powi(2));
    }

    #[test]
    fn multicut_full_split_is_stepwise() {
        // Additive table f: (0,1)->0.5, (1,0)->0.25, (2,1)->1.0. Per-step
        // residual by hand: 0.5 + 0.25 + 1.0 - 2.0 = -0.25.
        let mut table = vec![0.0; 6];
        table[1] = 0.5;
        table[2] = 0.25;
        table[5] = 1.0;
        let sc = AdditiveScorer { n_actions: 2, table };
        assert_eq!(multicut_return_loss(&sc, &traj(2.0), &[1, 2]).unwrap(), 0.0625);
    }

    #[test]
    fn invalid_cuts_rejected() {
        let sc = FnScorer(|_: &[Pair]| 0.0);
        let t = traj(1.0);
        assert!(multicut_return_loss(&sc, &t, &[2, 1]).is_err());
        assert!(multicut_return_loss(&sc, &t, &[0]).is_err());
        assert!(multicut_return_loss(&sc, &t, &[3]).is_err());
        assert!(multicut_return_loss(&sc, &t, &[1, 1]).is_err());
    }

    #[test]
    fn step_targets_telescope() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = SubTrajRewardModel::new("psi", PairEncoder::new(4, 2), 5, &mut rng);
        let t = traj(1.0);
        let targets = step_targets(&psi, &t.pairs());
        assert_eq!(targets[0], psi.score(&t.pairs()[..1]));
        let total: f64 = targets.iter().sum();
        assert!((total - psi.score(&t.pairs())).abs() < 1e-12);
    }

    #[test]
    fn joint_step_loss_leaves_psi_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = PairEncoder::new(4, 2);
        let psi = SubTrajRewardModel::new("psi", enc, 5, &mut rng);
        let phi = StepRewardModel::new("phi", enc, &[8], false, 3, &mut rng);
        let t = traj(1.0);
        for step in 0..3 {
            let (v, gpsi, gphi) = joint_step_loss(&phi, &psi, &t, step).unwrap();
            assert_eq!(v, step_loss(&phi, &psi, &t, step).unwrap());
            assert!(gpsi.iter().flatten().all(|&x| x == 0.0));
            assert_eq!(gphi.len(), phi.params().len());
            assert!(gphi.iter().flatten().any(|&x| x != 0.0));
        }
    }
}
