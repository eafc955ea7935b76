//! Running configured experiments: one deterministic training run per seed,
//! each writing into its own directory.
//!
//! Layout under `<root>/<name>/`:
//!
//! ```text
//! config.toml                  resolved config
//! index.tsv                    one row per finished seed
//! <method>/seed_<k>/metrics.jsonl
//! <method>/seed_<k>/checkpoint.json
//! ```
//!
//! A sweep nests one such tree per variant under `<root>/<name>/<key>=<value>/`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::rl::train::{MetricsRecord, Trainer};

/// Overrides `run.output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "DIASTER_OUTPUT_ROOT";
/// Worker threads for seed-level parallelism.
pub const THREADS_ENV: &str = "DIASTER_THREADS";
/// Window of the trailing mean used for "best smoothed" returns.
pub const SMOOTHING_WINDOW: usize = 5;

pub const INDEX_FILE: &str = "index.tsv";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const INDEX_HEADER: &str =
    "method\tseed\tstatus\tepisodes\tenv_steps\tfinal_return\tbest_smoothed_return\tmetrics\terror";

/// Appends metrics records as JSON lines, flushing after each one.
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Largest trailing mean over `window` consecutive evaluation returns
/// (shorter windows at the start).
pub fn best_smoothed(returns: &[f64], window: usize) -> Option<f64> {
    let w = window.max(1);
    (0..returns.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let s = &returns[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .fold(None, |best: Option<f64>, x| Some(best.map_or(x, |b| b.max(x))))
}

/// Outcome of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub metrics_path: PathBuf,
    pub result: std::result::Result<SeedStats, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedStats {
    pub episodes: usize,
    pub env_steps: usize,
    pub final_return: f64,
    pub best_smoothed_return: f64,
}

impl SeedOutcome {
    fn index_row(&self, method: &str) -> String {
        let path = self.metrics_path.display();
        match &self.result {
            Ok(s) => format!(
                "{method}\t{}\tok\t{}\t{}\t{}\t{}\t{path}\t",
                self.seed, s.episodes, s.env_steps, s.final_return, s.best_smoothed_return
            ),
            Err(e) => format!(
                "{method}\t{}\tfailed\tNA\tNA\tNA\tNA\t{path}\t{}",
                self.seed,
                e.replace(['\t', '\n'], " ")
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

impl RunOutcome {
    pub fn failures(&self) -> usize {
        self.seeds.iter().filter(|s| s.result.is_err()).count()
    }
}

/// Output root: the environment override if set, else the config's.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.run.output_dir.clone(),
    }
}

/// Thread pool sized by the environment override, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::config(THREADS_ENV, format!("`{v}` is not a thread count")))?;
        if n == 0 {
            return Err(Error::config(THREADS_ENV, "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::invalid(e.to_string()))
}

/// Train one seed, streaming metrics to `dir/metrics.jsonl` and writing the
/// final checkpoint next to it.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<SeedStats> {
    fs::create_dir_all(dir)?;
    let env = cfg.build_env()?;
    let mut trainer = Trainer::new(
        env,
        cfg.method,
        &cfg.method_params,
        cfg.rl.clone(),
        cfg.run.schedule(),
        seed,
    )?;
    let mut writer = MetricsWriter::create(&dir.join(METRICS_FILE))?;
    let summary = trainer.run(&mut |r| writer.write(r))?;
    trainer.checkpoint().save(&dir.join(CHECKPOINT_FILE))?;
    let returns: Vec<f64> = summary.records.iter().map(|r| r.mean_return).collect();
    Ok(SeedStats {
        episodes: summary.episodes,
        env_steps: summary.env_steps,
        final_return: summary.final_return().unwrap_or(f64::NAN),
        best_smoothed_return: best_smoothed(&returns, SMOOTHING_WINDOW).unwrap_or(f64::NAN),
    })
}

/// Every seed of `cfg` into `dir`, in parallel. A failing seed is recorded
/// in the index and does not stop the others.
pub fn run_into(cfg: &ExperimentConfig, dir: &Path, pool: &rayon::ThreadPool) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    let index_path = dir.join(INDEX_FILE);
    if !index_path.exists() {
        fs::write(&index_path, format!("{INDEX_HEADER}\n"))?;
    }
    let index = Mutex::new(OpenOptions::new().append(true).open(&index_path)?);
    let method = cfg.method.as_str();
    let seeds: Vec<SeedOutcome> = pool.install(|| {
        cfg.run
            .seeds
            .par_iter()
            .map(|&seed| {
                let seed_dir = dir.join(method).join(format!("seed_{seed}"));
                let result = run_seed(cfg, seed, &seed_dir).map_err(|e| e.to_string());
                let outcome = SeedOutcome {
                    seed,
                    metrics_path: seed_dir.join(METRICS_FILE),
                    result,
                };
                let row = outcome.index_row(method);
                let mut f = index.lock().unwrap_or_else(|p| p.into_inner());
                writeln!(f, "{row}")?;
                Ok(outcome)
            })
            .collect::<Result<_>>()
    })?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        seeds,
    })
}

/// `run <config>`: everything lands in `<root>/<name>/`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = output_root(cfg).join(&cfg.name);
    run_into(cfg, &dir, &thread_pool()?)
}

/// A `--vary key=v1,v2,...` argument.
#[derive(Clone, Debug, PartialEq)]
pub struct Variation {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for Variation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, vals) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("`{s}` is not key=v1,v2,...")))?;
        let values = split_values(vals);
        if key.trim().is_empty() || values.is_empty() {
            return Err(Error::Parse(format!("`{s}` is not key=v1,v2,...")));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Splits on commas outside brackets, so `[1,2],[3]` gives two values.
fn split_values(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out.into_iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

/// Cartesian product of variations, each as `(label, config)`. The label is
/// `key=value` parts joined with `,`.
pub fn expand_sweep(cfg: &ExperimentConfig, vary: &[Variation]) -> Result<Vec<(String, ExperimentConfig)>> {
    let mut out = vec![(String::new(), cfg.clone())];
    for v in vary {
        let mut next = Vec::with_capacity(out.len() * v.values.len());
        for (label, base) in &out {
            for value in &v.values {
                let c = base.with_override(&v.key, value)?;
                let part = format!("{}={}", v.key, value.replace(['/', '\\', ' '], "_"));
                let l = if label.is_empty() { part } else { format!("{label},{part}") };
                next.push((l, c));
            }
        }
        out = next;
    }
    Ok(out)
}

/// `sweep <config> --vary ...`: one run tree per variant under
/// `<root>/<name>/<label>/`.
pub fn run_sweep(cfg: &ExperimentConfig, vary: &[Variation]) -> Result<Vec<(String, RunOutcome)>> {
    let variants = expand_sweep(cfg, vary)?;
    let root = output_root(cfg).join(&cfg.name);
    let pool = thread_pool()?;
    variants
        .into_iter()
        .map(|(label, c)| {
            let dir = root.join(&label);
            run_into(&c, &dir, &pool).map(|o| (label, o))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::methods::MethodTag;
    use crate::env::spec::EnvSpec;

    fn tiny(method: MethodTag) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            method,
            EnvSpec::Chain {
                length: 4,
                horizon: Some(5),
                distractor: None,
            },
        );
        cfg.method_params.gru_hidden = 4;
        cfg.method_params.step_hidden = vec![8];
        cfg.method_params.trajectory_batch = Some(4);
        cfg.rl.batch_size = 16;
        cfg.rl.updates_per_episode = 1;
        cfg.run.n_episodes = 12;
        cfg.run.eval_interval = 20;
        cfg.run.eval_episodes = 2;
        cfg.run.seeds = vec![0, 1];
        cfg
    }

    #[test]
    fn smoothing() {
        assert_eq!(best_smoothed(&[], 3), None);
        assert_eq!(best_smoothed(&[0.0, 3.0, 3.0, 0.0], 2), Some(3.0));
        assert_eq!(best_smoothed(&[1.0, 3.0], 5), Some(2.0));
    }

    #[test]
    fn variation_parsing() {
        let v: Variation = "m=0,1,5".parse().unwrap();
        assert_eq!(v.values, vec!["0", "1", "5"]);
        let v: Variation = "run.seeds=[1,2],[3]".parse().unwrap();
        assert_eq!(v.values, vec!["[1,2]", "[3]"]);
        assert!("m".parse::<Variation>().is_err());
        assert!("m=".parse::<Variation>().is_err());
    }

    #[test]
    fn same_seed_same_bytes_and_index_rows() {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let cfg = tiny(MethodTag::Diaster);
        let a = run_into(&cfg, &dir.path().join("a"), &pool).unwrap();
        let b = run_into(&cfg, &dir.path().join("b"), &pool).unwrap();
        assert_eq!(a.failures(), 0);
        for (x, y) in a.seeds.iter().zip(&b.seeds) {
            assert_eq!(fs::read(&x.metrics_path).unwrap(), fs::read(&y.metrics_path).unwrap());
            assert!(x.metrics_path.with_file_name(CHECKPOINT_FILE).exists());
        }
        let index = fs::read_to_string(dir.path().join("a").join(INDEX_FILE)).unwrap();
        assert_eq!(index.lines().count(), 3);
        assert!(index.starts_with(INDEX_HEADER));
        let recs = read_metrics(&a.seeds[0].metrics_path).unwrap();
        assert!(recs.last().unwrap().is_final);
    }

    #[test]
    fn sweep_layout_one_file_per_variant_and_seed() {
        let cfg = tiny(MethodTag::Diaster);
        let vary = vec!["m=0,1,4".parse().unwrap(), "method=diaster,diaster_no_step".parse().unwrap()];
        let variants = expand_sweep(&cfg, &vary).unwrap();
        assert_eq!(variants.len(), 6);
        assert_eq!(variants[0].0, "m=0,method=diaster");
        assert_eq!(variants[5].1.method, MethodTag::DiasterNoStep);
        assert_eq!(variants[5].1.method_params.cut_points, 4);
        assert!(expand_sweep(&cfg, &["m=5".parse().unwrap()]).is_err());
    }

    #[test]
    fn failing_seed_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let mut cfg = tiny(MethodTag::Ircr);
        cfg.run.seeds = vec![3];
        // A file where the seed directory should go makes that seed fail.
        fs::create_dir_all(dir.path().join("ircr")).unwrap();
        fs::write(dir.path().join("ircr").join("seed_3"), "x").unwrap();
        let out = run_into(&cfg, dir.path(), &pool).unwrap();
        assert_eq!(out.failures(), 1);
        let index = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        assert!(index.lines().nth(1).unwrap().contains("\tfailed\t"));
    }
}
