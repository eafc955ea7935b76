//! Numerical certification of the decomposition identities on enumerable
//! MDPs, using exact expectations rather than samples.

pub mod battery;
pub mod checks;
pub mod fixtures;
pub mod report;

pub use battery::{run_battery, run_instance, sample_instance, BatteryConfig, BatteryReport, InstanceShape};
pub use checks::{
    argmax_mismatches, check_argmax_with_offsets, check_lemma_argmax, check_lemma_policy_gradient, check_qhat_offset,
    check_theorem1, check_theorem3, policy_action_values, policy_gradient, ExactContext, ScoredTrajectory,
};
pub use fixtures::{negative_controls, ArgmaxFixture, QhatViolationFixture, ViolatingScorer};
pub use report::{summarize, write_jsonl, TagSummary, TheoremReport};
