use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use diaster::harness::{
    gradient_suite, load_config, run_experiment, run_sweep, summarize_dir, worst_per_loss, RunOutcome, Variation,
    GRAD_TOL,
};
use diaster::theory::{negative_controls, run_battery, write_jsonl, BatteryConfig};

#[derive(Parser)]
#[command(name = "diaster", version, about = "Episodic return decomposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config.
    Run { config: PathBuf },
    /// Train the config once per combination of overridden values.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`; repeat for a grid. `m` means method_params.cut_points.
        #[arg(long, required = true)]
        vary: Vec<Variation>,
    },
    /// Write summary.tsv (mean and standard error across seeds) for a run directory.
    Summarize { dir: PathBuf },
    /// Exact-expectation checks on randomized enumerable instances.
    VerifyTheory {
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// One JSON record per check.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every trained loss.
    GradCheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
}

fn report_run(outcome: &RunOutcome) -> bool {
    for s in &outcome.seeds {
        match &s.result {
            Ok(st) => println!(
                "seed {}: final {:.4} best smoothed {:.4} ({} episodes)",
                s.seed, st.final_return, st.best_smoothed_return, st.episodes
            ),
            Err(e) => println!("seed {}: FAILED {e}", s.seed),
        }
    }
    println!("wrote {}", outcome.dir.display());
    outcome.failures() == 0
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            Ok(report_run(&run_experiment(&cfg)?))
        }
        Command::Sweep { config, vary } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            let mut ok = true;
            for (label, outcome) in run_sweep(&cfg, &vary)? {
                println!("== {label}");
                ok &= report_run(&outcome);
            }
            Ok(ok)
        }
        Command::Summarize { dir } => {
            let path = summarize_dir(&dir)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::VerifyTheory {
            tol,
            instances,
            seed,
            out,
        } => {
            let cfg = BatteryConfig {
                instances,
                seed,
                tol,
                ..BatteryConfig::default()
            };
            let start = std::time::Instant::now();
            let report = run_battery(&cfg)?;
            let controls = negative_controls(tol)?;
            if let Some(path) = out {
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_jsonl(BufWriter::new(f), &report.records)?;
                println!("wrote {}", path.display());
            }
            let mut ok = true;
            for s in report.summary() {
                let status = if s.all_pass() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {:<22} {:>6}/{:<6} max gap {:.3e}",
                    s.tag, s.passed, s.checks, s.max_gap
                );
                ok &= s.all_pass();
            }
            for c in &controls {
                let status = if c.pass { "FAIL (control passed)" } else { "PASS (control flagged)" };
                println!("{status} negative control {}: gap {:.3e}", c.tag, c.gap);
                ok &= !c.pass;
            }
            println!("{instances} instances in {:.1}s", start.elapsed().as_secs_f64());
            Ok(ok)
        }
        Command::GradCheck { seeds } => {
            let recs = gradient_suite(seeds)?;
            let mut ok = true;
            for (kind, worst) in worst_per_loss(&recs) {
                let pass = worst < GRAD_TOL;
                ok &= pass;
                println!(
                    "{} {:<15} max relative error {worst:.3e} over {seeds} seeds",
                    if pass { "PASS" } else { "FAIL" },
                    kind.as_str()
                );
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
