//! Episodic-reward environments and exact enumeration oracles.
//!
//! Agents interact through [`EpisodicEnv`], which reports next states and a
//! done flag but never a per-step reward. The full tables, hidden rewards
//! included, stay available to oracles through [`EnvInstance::oracle_mdp`].

pub mod enumerate;
pub mod instance;
pub mod mdp;
pub mod roster;
pub mod spec;
pub mod trajectory;

pub use enumerate::{
    enumerate_prefixes, enumerate_trajectories, enumerate_trajectories_capped, enumeration_size, occupancies,
    state_occupancy, WeightedPrefix, WeightedTrajectory, DEFAULT_ENUMERATION_CAP,
};
pub use instance::{EnvInstance, EnvKind, EpisodicEnv, Step};
pub use mdp::{EnumeratedMdp, TabularPolicy};
pub use roster::{chain, key_door, point_maze, random_mdp, u_maze, KeyDoorLayout, RandomMdpOptions};
pub use spec::EnvSpec;
pub use trajectory::{Pair, PairEncoder, Trajectory};
