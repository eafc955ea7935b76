//! Experiment configuration files.
//!
//! ```toml
//! name = "key_door_diaster"
//! method = "diaster"
//! env_file = "envs/key_door.toml"   # or an inline [env] table
//!
//! [method_params]
//! cut_points = 1
//!
//! [rl]
//! batch_size = 128
//!
//! [run]
//! n_episodes = 3000
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! Omitted keys take their defaults; unknown keys are rejected. A relative
//! `env_file` is resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomposition::methods::{MethodParams, MethodTag};
use crate::env::instance::EnvInstance;
use crate::env::spec::EnvSpec;
use crate::error::{Error, Result};
use crate::rl::eval::DEFAULT_EVAL_EPISODES;
use crate::rl::train::{AgentKind, RlParams, Schedule};

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn default_name() -> String {
    "experiment".to_string()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub n_episodes: usize,
    /// Environment steps between evaluations.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_episodes: 1000,
            eval_interval: 1000,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: default_output_dir(),
        }
    }
}

impl RunParams {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            n_episodes: self.n_episodes,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub method: MethodTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvSpec>,
    #[serde(default)]
    pub method_params: MethodParams,
    #[serde(default)]
    pub rl: RlParams,
    #[serde(default)]
    pub run: RunParams,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

impl ExperimentConfig {
    /// A config with every default and an inline environment.
    pub fn new(method: MethodTag, env: EnvSpec) -> Self {
        Self {
            name: default_name(),
            method,
            env_file: None,
            env: Some(env),
            method_params: MethodParams::default(),
            rl: RlParams::default(),
            run: RunParams::default(),
        }
    }

    /// Parse and validate. `base` resolves a relative `env_file`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(parse_err)?;
        if let (Some(base), Some(file)) = (base, cfg.env_file.as_mut()) {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(parse_err)
    }

    /// The environment description, reading `env_file` when given.
    pub fn env_spec(&self) -> Result<EnvSpec> {
        match (&self.env, &self.env_file) {
            (Some(spec), None) => Ok(spec.clone()),
            (None, Some(path)) => EnvSpec::load(path).map_err(|e| match e {
                Error::Io(io) => Error::config("env_file", format!("{}: {io}", path.display())),
                other => other,
            }),
            (Some(_), Some(_)) => Err(Error::config("env", "give either `env` or `env_file`, not both")),
            (None, None) => Err(Error::config("env", "missing; give an [env] table or `env_file`")),
        }
    }

    pub fn build_env(&self) -> Result<EnvInstance> {
        self.env_spec()?.build()
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env_spec()?;
        let horizon = spec.horizon();
        if horizon == 0 {
            return Err(Error::config("env.horizon", "must be at least 1"));
        }
        let mp = &self.method_params;
        if mp.cut_points > horizon - 1 {
            return Err(Error::config(
                "method_params.cut_points",
                format!("m = {} is outside [0, T-1] = [0, {}]", mp.cut_points, horizon - 1),
            ));
        }
        if mp.gru_hidden == 0 {
            return Err(Error::config("method_params.gru_hidden", "must be at least 1"));
        }
        if mp.step_hidden.contains(&0) {
            return Err(Error::config("method_params.step_hidden", "layer widths must be at least 1"));
        }
        if mp.rrd_k == 0 {
            return Err(Error::config("method_params.rrd_k", "must be at least 1"));
        }
        if !(mp.psi_lr > 0.0 && mp.psi_lr.is_finite()) {
            return Err(Error::config("method_params.psi_lr", "must be positive"));
        }
        if !(mp.phi_lr > 0.0 && mp.phi_lr.is_finite()) {
            return Err(Error::config("method_params.phi_lr", "must be positive"));
        }
        if mp.trajectory_batch == Some(0) {
            return Err(Error::config("method_params.trajectory_batch", "must be at least 1"));
        }
        let rl = &self.rl;
        if !(rl.gamma > 0.0 && rl.gamma <= 1.0) {
            return Err(Error::config("rl.gamma", format!("{} is outside (0, 1]", rl.gamma)));
        }
        if !(rl.q_lr > 0.0 && rl.q_lr <= 1.0) {
            return Err(Error::config("rl.q_lr", format!("{} is outside (0, 1]", rl.q_lr)));
        }
        if !(rl.lr > 0.0 && rl.lr.is_finite()) {
            return Err(Error::config("rl.lr", "must be positive"));
        }
        if rl.agent == AgentKind::Neural && (rl.hidden.is_empty() || rl.hidden.contains(&0)) {
            return Err(Error::config("rl.hidden", "needs at least one layer of width at least 1"));
        }
        if !(rl.tau > 0.0 && rl.tau <= 1.0) {
            return Err(Error::config("rl.tau", format!("{} is outside (0, 1]", rl.tau)));
        }
        let eps = &rl.epsilon;
        for (key, v) in [("rl.epsilon.start", eps.start), ("rl.epsilon.end", eps.end), ("rl.epsilon.decay_fraction", eps.decay_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("{v} is outside [0, 1]")));
            }
        }
        if rl.batch_size == 0 {
            return Err(Error::config("rl.batch_size", "B must be at least 1"));
        }
        if rl.buffer_capacity == 0 {
            return Err(Error::config("rl.buffer_capacity", "must be at least 1"));
        }
        if rl.trajectory_capacity == Some(0) {
            return Err(Error::config("rl.trajectory_capacity", "must be at least 1"));
        }
        let run = &self.run;
        if run.n_episodes == 0 {
            return Err(Error::config("run.n_episodes", "must be at least 1"));
        }
        if run.eval_interval == 0 {
            return Err(Error::config("run.eval_interval", "must be at least 1"));
        }
        if run.eval_episodes == 0 {
            return Err(Error::config("run.eval_episodes", "must be at least 1"));
        }
        if run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "needs at least one seed"));
        }
        let mut sorted = run.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != run.seeds.len() {
            return Err(Error::config("run.seeds", "seeds must be distinct"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name", "must be a nonempty single path component"));
        }
        Ok(())
    }

    /// Override one dotted key with a TOML literal (bare words are taken as
    /// strings), then revalidate. `m` is shorthand for
    /// `method_params.cut_points`.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let key = match key {
            "m" => "method_params.cut_points",
            other => other,
        };
        let mut doc = toml::Value::try_from(self).map_err(parse_err)?;
        let parsed = parse_literal(value);
        let mut slot = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| Error::config(key, "path goes through a non-table value"))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), parsed.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let text = toml::to_string(&doc).map_err(parse_err)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::config(key, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_literal(value: &str) -> toml::Value {
    let wrapped = format!("v = {value}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.to_string())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Read, resolve and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
method = "diaster"
[env]
kind = "chain"
length = 8
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        assert_eq!(cfg.rl.batch_size, 256);
        assert_eq!(cfg.rl.buffer_capacity, 1_000_000);
        assert_eq!(cfg.rl.gamma, 0.99);
        assert_eq!(cfg.rl.lr, 3e-4);
        assert_eq!(cfg.method_params.psi_lr, 3e-4);
        assert_eq!(cfg.rl.updates_per_episode, 4);
        assert_eq!(cfg.run.seeds, DEFAULT_SEEDS.to_vec());
        assert_eq!(cfg.run.eval_episodes, 10);
    }

    #[test]
    fn cut_points_must_fit_horizon() {
        let text = format!("{MINIMAL}[method_params]\ncut_points = 8\n");
        let err = ExperimentConfig::from_toml_str(&text, None).unwrap_err();
        assert!(err.to_string().contains("method_params.cut_points"), "{err}");
        let ok = format!("{MINIMAL}[method_params]\ncut_points = 7\n");
        assert!(ExperimentConfig::from_toml_str(&ok, None).is_ok());
    }

    #[test]
    fn range_and_key_errors_name_the_key() {
        for (extra, key) in [
            ("[rl]\nbatch_size = 0\n", "rl.batch_size"),
            ("[rl]\ngamma = 0.0\n", "rl.gamma"),
            ("[rl]\ngamma = 1.5\n", "rl.gamma"),
            ("[run]\nseeds = []\n", "run.seeds"),
        ] {
            let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}{extra}"), None).unwrap_err();
            assert!(err.to_string().contains(key), "{key}: {err}");
        }
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}bogus = 1\n"), None);
        assert!(err.is_err());
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}[rl]\nbogus = 1\n"), None).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn gamma_one_allowed() {
        assert!(ExperimentConfig::from_toml_str(&format!("{MINIMAL}[rl]\ngamma = 1.0\n"), None).is_ok());
    }

    #[test]
    fn roundtrip_is_identity() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap(), None).unwrap();
        assert_eq!(back, cfg);
        let mut kd = ExperimentConfig::new(MethodTag::Rrd, EnvSpec::key_door_default());
        kd.rl.epsilon.end = 0.1;
        kd.method_params.trajectory_batch = Some(8);
        let back = ExperimentConfig::from_toml_str(&kd.to_toml_string().unwrap(), None).unwrap();
        assert_eq!(back, kd);
    }

    #[test]
    fn env_file_resolved_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("chain.toml"), "kind = \"chain\"\nlength = 5\n").unwrap();
        let text = "method = \"ircr\"\nenv_file = \"chain.toml\"\n";
        let cfg = ExperimentConfig::from_toml_str(text, Some(dir.path())).unwrap();
        assert_eq!(cfg.env_spec().unwrap().horizon(), 5);
        let missing = ExperimentConfig::from_toml_str("method = \"ircr\"\nenv_file = \"nope.toml\"\n", Some(dir.path()));
        assert!(missing.unwrap_err().to_string().contains("env_file"));
        let neither = ExperimentConfig::from_toml_str("method = \"ircr\"\n", None);
        assert!(neither.is_err());
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        assert_eq!(cfg.with_override("m", "5").unwrap().method_params.cut_points, 5);
        assert_eq!(cfg.with_override("method", "rrd").unwrap().method, MethodTag::Rrd);
        assert_eq!(cfg.with_override("rl.gamma", "0.5").unwrap().rl.gamma, 0.5);
        assert_eq!(cfg.with_override("run.seeds", "[7]").unwrap().run.seeds, vec![7]);
        assert!(cfg.with_override("m", "8").is_err());
        assert!(cfg.with_override("rl.nope", "1").is_err());
    }
}
