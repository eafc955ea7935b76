//! Declarative environment description, read from TOML.
//!
//! ```toml
//! kind = "key_door_grid"
//! width = 5
//! height = 5
//! horizon = 30
//! start = [0, 0]
//! key = [0, 4]
//! door = [4, 4]
//! walls = []
//! ```
//!
//! Kinds and their keys (coordinates are `[row, column]`):
//!
//! | kind              | keys |
//! |-------------------|------|
//! | `chain`           | `length`, `horizon` (default `length`), `distractor` (optional) |
//! | `key_door_grid`   | `width`, `height`, `horizon`, `start`, `key`, `door`, `walls` |
//! | `point_maze_grid` | `width`, `height`, `horizon`, `start`, `goal`, `walls` |
//! | `u_maze`          | `horizon` |
//! | `random`          | `n_states`, `n_actions`, `horizon`, `seed`, `sparsity`, `n_terminal` |
//! | `custom`          | `n_states`, `n_actions`, `horizon`, `transition[s][a][s']`, `reward[s][a]`, `initial`, `terminal` (list of states) |
//!
//! Unknown keys are rejected.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::instance::{EnvInstance, EnvKind};
use crate::env::mdp::EnumeratedMdp;
use crate::env::roster;
use crate::error::{Error, Result};

fn default_grid() -> usize {
    5
}

fn default_kd_horizon() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Chain {
        length: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distractor: Option<f64>,
    },
    KeyDoorGrid {
        #[serde(default = "default_grid")]
        width: usize,
        #[serde(default = "default_grid")]
        height: usize,
        #[serde(default = "default_kd_horizon")]
        horizon: usize,
        start: [usize; 2],
        key: [usize; 2],
        door: [usize; 2],
        #[serde(default)]
        walls: Vec<[usize; 2]>,
    },
    PointMazeGrid {
        width: usize,
        height: usize,
        horizon: usize,
        start: [usize; 2],
        goal: [usize; 2],
        #[serde(default)]
        walls: Vec<[usize; 2]>,
    },
    UMaze {
        horizon: usize,
    },
    Random {
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        seed: u64,
        #[serde(default)]
        sparsity: f64,
        #[serde(default)]
        n_terminal: usize,
    },
    Custom {
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        initial: Vec<f64>,
        #[serde(default)]
        terminal: Vec<usize>,
    },
}

impl EnvSpec {
    /// Default key-door task used throughout the examples and tests.
    pub fn key_door_default() -> Self {
        EnvSpec::KeyDoorGrid {
            width: 5,
            height: 5,
            horizon: 30,
            start: [0, 0],
            key: [0, 4],
            door: [4, 4],
            walls: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSpec::Chain { length, horizon, .. } => horizon.unwrap_or(*length),
            EnvSpec::KeyDoorGrid { horizon, .. }
            | EnvSpec::PointMazeGrid { horizon, .. }
            | EnvSpec::UMaze { horizon }
            | EnvSpec::Random { horizon, .. }
            | EnvSpec::Custom { horizon, .. } => *horizon,
        }
    }

    pub fn build(&self) -> Result<EnvInstance> {
        match self {
            EnvSpec::Chain {
                length,
                horizon,
                distractor,
            } => roster::chain(*length, horizon.unwrap_or(*length), *distractor),
            EnvSpec::KeyDoorGrid {
                width,
                height,
                horizon,
                start,
                key,
                door,
                walls,
            } => Ok(roster::key_door(*width, *height, *horizon, *start, *key, *door, walls)?.0),
            EnvSpec::PointMazeGrid {
                width,
                height,
                horizon,
                start,
                goal,
                walls,
            } => roster::point_maze(*width, *height, *horizon, *start, *goal, walls),
            EnvSpec::UMaze { horizon } => roster::u_maze(*horizon),
            EnvSpec::Random {
                n_states,
                n_actions,
                horizon,
                seed,
                sparsity,
                n_terminal,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let opts = roster::RandomMdpOptions {
                    sparsity: *sparsity,
                    n_terminal: *n_terminal,
                    ..Default::default()
                };
                let mdp = roster::random_mdp(*n_states, *n_actions, *horizon, opts, &mut rng)?;
                Ok(EnvInstance::new(EnvKind::Custom, format!("random{seed}"), mdp))
            }
            EnvSpec::Custom {
                n_states,
                n_actions,
                horizon,
                transition,
                reward,
                initial,
                terminal,
            } => {
                let (ns, na) = (*n_states, *n_actions);
                if transition.len() != ns || transition.iter().any(|r| r.len() != na) {
                    return Err(Error::config("transition", format!("expected {ns} x {na} rows")));
                }
                if reward.len() != ns || reward.iter().any(|r| r.len() != na) {
                    return Err(Error::config("reward", format!("expected {ns} x {na} entries")));
                }
                let flat_t: Vec<f64> = transition.iter().flatten().flatten().copied().collect();
                let flat_r: Vec<f64> = reward.iter().flatten().copied().collect();
                let mut term = vec![false; ns];
                for &s in terminal {
                    if s >= ns {
                        return Err(Error::config("terminal", format!("state {s} out of range")));
                    }
                    term[s] = true;
                }
                let mdp = EnumeratedMdp::new(ns, na, *horizon, flat_t, flat_r, initial.clone(), term)?;
                Ok(EnvInstance::new(EnvKind::Custom, "custom", mdp))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::instance::EpisodicEnv;

    #[test]
    fn parse_chain_with_defaults() {
        let spec = EnvSpec::from_toml_str("kind = \"chain\"\nlength = 8\n").unwrap();
        assert_eq!(spec.horizon(), 8);
        let env = spec.build().unwrap();
        assert_eq!(env.n_states(), 8);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = EnvSpec::from_toml_str("kind = \"chain\"\nlength = 8\nspeed = 2\n").unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn custom_tables() {
        let text = r#"
kind = "custom"
n_states = 2
n_actions = 1
horizon = 2
transition = [[[0.0, 1.0]], [[0.0, 1.0]]]
reward = [[0.5], [0.0]]
initial = [1.0, 0.0]
terminal = [1]
"#;
        let env = EnvSpec::from_toml_str(text).unwrap().build().unwrap();
        assert_eq!(env.oracle_mdp().optimal_return(), 0.5);
        assert!(env.oracle_mdp().is_terminal(1));
    }

    #[test]
    fn toml_roundtrip() {
        let spec = EnvSpec::key_door_default();
        let back = EnvSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
        assert_eq!(spec, back);
    }
}
