use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use diaster::decomposition::{
    multicut_bounds, multicut_return_loss, return_loss, sample_cut_points, segments_residual, step_targets,
    AdditiveScorer, CutPointPlan, SegmentScorer, SubTrajRewardModel,
};
use diaster::env::{random_mdp, PairEncoder, RandomMdpOptions, Trajectory};
use diaster::harness::{best_smoothed, mean_and_stderr};

const N_STATES: usize = 5;
const N_ACTIONS: usize = 3;

fn trajectory() -> impl Strategy<Value = Trajectory> {
    (1usize..12).prop_flat_map(|len| {
        (
            prop::collection::vec(0..N_STATES, len + 1),
            prop::collection::vec(0..N_ACTIONS, len),
            -5.0f64..5.0,
        )
            .prop_map(|(s, a, r)| Trajectory::new(s, a, r).unwrap())
    })
}

fn psi(seed: u64) -> SubTrajRewardModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SubTrajRewardModel::new("psi", PairEncoder::new(N_STATES, N_ACTIONS), 6, &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_targets_telescope(traj in trajectory(), seed in 0u64..1000) {
        let psi = psi(seed);
        let pairs = traj.pairs();
        let sum: f64 = step_targets(&psi, &pairs).iter().sum();
        prop_assert!((sum - psi.score(&pairs)).abs() <= 1e-9);
    }

    #[test]
    fn single_cut_matches_two_segment_loss(traj in trajectory(), seed in 0u64..1000) {
        let psi = psi(seed);
        for c in 1..traj.len() {
            let a = multicut_return_loss(&psi, &traj, &[c]).unwrap();
            let b = return_loss(&psi, &traj, c).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_segment_scores_zero(traj in trajectory(), seed in 0u64..1000) {
        let psi = psi(seed);
        prop_assert_eq!(psi.score(&[]), 0.0);
        let whole = return_loss(&psi, &traj, 0).unwrap();
        prop_assert_eq!(whole.to_bits(), return_loss(&psi, &traj, traj.len()).unwrap().to_bits());
    }

    #[test]
    fn prefix_scores_start_at_zero_and_end_at_whole(traj in trajectory(), seed in 0u64..1000) {
        let psi = psi(seed);
        let pairs = traj.pairs();
        let p = psi.prefix_scores(&pairs);
        prop_assert_eq!(p.len(), pairs.len() + 1);
        prop_assert_eq!(p[0], 0.0);
        prop_assert!((p[pairs.len()] - psi.score(&pairs)).abs() <= 1e-12);
    }

    #[test]
    fn sampled_cuts_are_sorted_distinct_interior(len in 1usize..40, m in 0usize..40, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match sample_cut_points(len, m, &mut rng) {
            Ok(cuts) => {
                prop_assert_eq!(cuts.len(), m);
                prop_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(cuts.iter().all(|&c| c >= 1 && c < len));
                prop_assert!(multicut_bounds(len, &cuts).is_ok());
            }
            Err(_) => prop_assert!(m > len.saturating_sub(1)),
        }
    }

    #[test]
    fn clipped_plan_never_exceeds_the_episode(len in 0usize..20, m in 0usize..30, zero in any::<bool>(), seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cuts = CutPointPlan { m, include_zero: zero }.sample(len, &mut rng);
        let lo = usize::from(!zero);
        prop_assert!(cuts.iter().all(|&c| c >= lo && c < len.max(1)));
        prop_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn additive_oracle_has_zero_residual_for_any_segmentation(
        seed in 0u64..500,
        walk in prop::collection::vec((0usize..N_ACTIONS, 0.0f64..1.0), 1..8),
        split in prop::collection::vec(any::<bool>(), 8),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = &random_mdp(N_STATES, N_ACTIONS, walk.len(), RandomMdpOptions::default(), &mut rng).unwrap();
        let mut states = vec![0];
        let mut actions = Vec::new();
        for &(a, u) in &walk {
            let s = *states.last().unwrap();
            let row = mdp.transition_row(s, a);
            let mut acc = 0.0;
            let next = row.iter().position(|p| { acc += p; u < acc }).unwrap_or(N_STATES - 1);
            actions.push(a);
            states.push(next);
        }
        let pairs: Vec<(usize, usize)> = states.iter().zip(&actions).map(|(&s, &a)| (s, a)).collect();
        let traj = Trajectory::new(states, actions, mdp.hidden_return(&pairs)).unwrap();
        let cuts: Vec<usize> = (1..traj.len()).filter(|&c| split[c]).collect();
        let bounds = multicut_bounds(traj.len(), &cuts).unwrap();
        let exact = AdditiveScorer::hidden_partial_sums(mdp);
        prop_assert!(segments_residual(&exact, &traj, &bounds).abs() <= 1e-12);
    }

    #[test]
    fn standard_error_is_shift_invariant(xs in prop::collection::vec(-100.0f64..100.0, 1..20), shift in -50.0f64..50.0) {
        let (m, se) = mean_and_stderr(&xs).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let (m2, se2) = mean_and_stderr(&shifted).unwrap();
        prop_assert!(se >= 0.0);
        prop_assert!((m2 - m - shift).abs() <= 1e-9);
        prop_assert!((se2 - se).abs() <= 1e-9);
    }

    #[test]
    fn best_smoothed_is_bounded_by_extremes(xs in prop::collection::vec(-10.0f64..10.0, 1..30), w in 1usize..8) {
        let b = best_smoothed(&xs, w).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(b >= lo - 1e-12 && b <= hi + 1e-12);
    }
}
