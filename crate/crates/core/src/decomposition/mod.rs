//! Return decomposition: segment and step reward models, their losses,
//! cut-point sampling, the redistribution methods and the exact proxy-reward
//! oracle.

pub mod cuts;
pub mod losses;
pub mod methods;
pub mod oracle;
pub mod scorer;
pub mod step;
pub mod subtraj;

pub use cuts::{sample_cut_points, CutPointPlan};
pub use losses::{
    multicut_bounds, multicut_return_loss, return_loss, rrd_loss, segments_residual, step_loss, step_targets,
};
pub use methods::{build_method, BufferStats, MethodParams, MethodTag, Redistribution, TrainStats};
pub use oracle::{exact_step_reward_oracle, ExactOracle};
pub use scorer::{AdditiveScorer, FnScorer, ReturnCorrected, SegmentScorer};
pub use step::StepRewardModel;
pub use subtraj::{SubTrajRewardModel, DEFAULT_GRU_HIDDEN};
