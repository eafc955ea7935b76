//! Off-policy learning on proxy rewards.

pub mod agent;
pub mod buffer;
pub mod dqn;
pub mod eval;
pub mod qtable;
pub mod train;

pub use agent::{argmax, argmax_set, Agent, EpsilonSchedule, Transition, UpdateStats};
pub use buffer::{ReplayBuffer, TransitionRef, DEFAULT_CAPACITY};
pub use dqn::{NeuralQAgent, DEFAULT_TAU};
pub use eval::{derive_seed, evaluate_greedy, evaluate_policy, EvalResult, DEFAULT_EVAL_EPISODES};
pub use qtable::{discounted_q, finite_horizon_q, QTable, DEFAULT_Q_LR};
pub use train::{AgentKind, MetricsRecord, RlParams, RunSummary, Schedule, Trainer, METRICS_SCHEMA_VERSION};
