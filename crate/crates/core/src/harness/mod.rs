//! Configuration, experiment orchestration, metrics persistence and
//! cross-seed summaries.

pub mod config;
pub mod frozen;
pub mod gradsuite;
pub mod runner;
pub mod summarize;

pub use config::{load_config, ExperimentConfig, RunParams, DEFAULT_SEEDS};
pub use frozen::{collect_biased, exhaustive_loss, fit_frozen, mean_return_error, FitConfig, FitReport};
pub use gradsuite::{check_loss, gradient_suite, worst_per_loss, GradRecord, LossKind, GRAD_TOL};
pub use runner::{
    best_smoothed, expand_sweep, output_root, read_metrics, run_experiment, run_into, run_seed, run_sweep, thread_pool,
    MetricsWriter, RunOutcome, SeedOutcome, SeedStats, Variation, OUTPUT_ROOT_ENV, THREADS_ENV,
};
pub use summarize::{mean_and_stderr, summarize_dir, SUMMARY_FILE};
