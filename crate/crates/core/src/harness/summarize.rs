//! Cross-seed comparison tables.
//!
//! `summary.tsv` has one row per (group, evaluation point). A group is the
//! directory holding the `seed_<k>` directories, relative to the summarized
//! root. Evaluation points are aligned by env step; a seed without a record
//! at some step shows `NA` in its column and is left out of that row's mean.
//! Each group ends with a `final` row built from the last record of every
//! seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::runner::{read_metrics, METRICS_FILE};

pub const SUMMARY_FILE: &str = "summary.tsv";

/// Sample mean and standard error `sqrt(sum (x - mean)^2 / (n (n - 1)))`,
/// with standard error 0 for a single value.
pub fn mean_and_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    Some((mean, (ss / (n * (n - 1)) as f64).sqrt()))
}

/// One seed's evaluation curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedCurve {
    pub seed: u64,
    /// `(env_step, mean_return)` for non-final records.
    pub points: Vec<(usize, f64)>,
    pub final_return: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    /// `None` for the final row.
    pub env_step: Option<usize>,
    pub n: usize,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub per_seed: BTreeMap<u64, Option<f64>>,
}

fn collect_metrics(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_metrics(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == METRICS_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

/// Curves grouped by run directory, in path order.
pub fn load_curves(root: &Path) -> Result<BTreeMap<String, Vec<SeedCurve>>> {
    let mut files = Vec::new();
    collect_metrics(root, &mut files)?;
    let mut groups: BTreeMap<String, Vec<SeedCurve>> = BTreeMap::new();
    for f in files {
        let records = read_metrics(&f)?;
        let Some(first) = records.first() else { continue };
        let seed = first.seed;
        let seed_dir = f.parent().expect("metrics file has a parent");
        let group_dir = seed_dir.parent().unwrap_or(seed_dir);
        let group = group_dir
            .strip_prefix(root)
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .unwrap_or_default();
        let group = if group.is_empty() { ".".to_string() } else { group };
        let points = records
            .iter()
            .filter(|r| !r.is_final)
            .map(|r| (r.env_step, r.mean_return))
            .collect();
        let final_return = records.iter().rev().find(|r| r.is_final).map(|r| r.mean_return);
        groups.entry(group).or_default().push(SeedCurve {
            seed,
            points,
            final_return,
        });
    }
    Ok(groups)
}

fn row(group: &str, env_step: Option<usize>, per_seed: BTreeMap<u64, Option<f64>>) -> SummaryRow {
    let xs: Vec<f64> = per_seed.values().flatten().copied().collect();
    let stats = mean_and_stderr(&xs);
    SummaryRow {
        group: group.to_string(),
        env_step,
        n: xs.len(),
        mean: stats.map(|s| s.0),
        stderr: stats.map(|s| s.1),
        per_seed,
    }
}

pub fn summary_rows(groups: &BTreeMap<String, Vec<SeedCurve>>) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (group, curves) in groups {
        let steps: BTreeSet<usize> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)).collect();
        for &step in &steps {
            let per_seed = curves
                .iter()
                .map(|c| (c.seed, c.points.iter().find(|p| p.0 == step).map(|p| p.1)))
                .collect();
            rows.push(row(group, Some(step), per_seed));
        }
        let finals = curves.iter().map(|c| (c.seed, c.final_return)).collect();
        rows.push(row(group, None, finals));
    }
    rows
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn render_tsv(rows: &[SummaryRow]) -> String {
    let seeds: BTreeSet<u64> = rows.iter().flat_map(|r| r.per_seed.keys().copied()).collect();
    let mut out = String::from("group\tpoint\tenv_step\tn\tmean_return\tstd_error");
    for s in &seeds {
        out.push_str(&format!("\tseed_{s}"));
    }
    out.push('\n');
    for r in rows {
        let (point, step) = match r.env_step {
            Some(s) => ("eval", s.to_string()),
            None => ("final", "NA".to_string()),
        };
        out.push_str(&format!(
            "{}\t{point}\t{step}\t{}\t{}\t{}",
            r.group,
            r.n,
            fmt_opt(r.mean),
            fmt_opt(r.stderr)
        ));
        for s in &seeds {
            out.push('\t');
            out.push_str(&fmt_opt(r.per_seed.get(s).copied().flatten()));
        }
        out.push('\n');
    }
    out
}

/// `summarize <dir>`: writes `<dir>/summary.tsv` and returns its path.
pub fn summarize_dir(root: &Path) -> Result<PathBuf> {
    let groups = load_curves(root)?;
    if groups.is_empty() {
        return Err(Error::invalid(format!("no {METRICS_FILE} under {}", root.display())));
    }
    let path = root.join(SUMMARY_FILE);
    fs::write(&path, render_tsv(&summary_rows(&groups)))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::methods::MethodTag;
    use crate::harness::runner::MetricsWriter;
    use crate::rl::train::{MetricsRecord, METRICS_SCHEMA_VERSION};

    fn rec(seed: u64, env_step: usize, ret: f64, is_final: bool) -> MetricsRecord {
        MetricsRecord {
            schema: METRICS_SCHEMA_VERSION,
            method: MethodTag::Diaster,
            seed,
            episode: 0,
            env_step,
            wall_step: 0,
            mean_return: ret,
            decomposition_loss: None,
            step_loss: None,
            td_loss: None,
            skipped_updates: 0,
            is_final,
        }
    }

    fn write(dir: &Path, seed: u64, recs: &[MetricsRecord]) {
        let d = dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&d).unwrap();
        let mut w = MetricsWriter::create(&d.join(METRICS_FILE)).unwrap();
        for r in recs {
            w.write(r).unwrap();
        }
    }

    #[test]
    fn hand_formula() {
        assert_eq!(mean_and_stderr(&[1.0, 3.0]), Some((2.0, 1.0)));
        assert_eq!(mean_and_stderr(&[4.0]), Some((4.0, 0.0)));
        assert_eq!(mean_and_stderr(&[2.0; 5]), Some((2.0, 0.0)));
        assert_eq!(mean_and_stderr(&[]), None);
    }

    #[test]
    fn two_seeds_with_gap() {
        let dir = tempfile::tempdir().unwrap();
        let g = dir.path().join("diaster");
        write(&g, 0, &[rec(0, 0, 1.0, false), rec(0, 10, 1.0, false), rec(0, 12, 1.0, true)]);
        write(&g, 1, &[rec(1, 0, 3.0, false), rec(1, 20, 2.0, false), rec(1, 25, 3.0, true)]);
        let path = summarize_dir(dir.path()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "group\tpoint\tenv_step\tn\tmean_return\tstd_error\tseed_0\tseed_1");
        assert_eq!(lines[1], "diaster\teval\t0\t2\t2\t1\t1\t3");
        assert_eq!(lines[2], "diaster\teval\t10\t1\t1\t0\t1\tNA");
        assert_eq!(lines[3], "diaster\teval\t20\t1\t2\t0\tNA\t2");
        assert_eq!(lines[4], "diaster\tfinal\tNA\t2\t2\t1\t1\t3");
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(summarize_dir(dir.path()).is_err());
    }
}
