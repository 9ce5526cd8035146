//! Command-line front end.
//!
//! One subcommand per experiment plus `validate-config`. Every experiment
//! writes a single CSV named after itself into the resolved output
//! directory and prints a one-line summary. Exit codes: `0` success, `1`
//! invalid usage or configuration, `2` training divergence.

use crate::error::{Error, Result};
use crate::harness::bandit_suite::{run_bandit_suite, write_bandit_csv};
use crate::harness::config::{self, Experiment, RunConfig};
use crate::harness::consumption_run::{run_consumption, write_consumption_csv};
use crate::harness::frontier::{run_frontier, write_frontier_csv, RunStatus};
use crate::harness::landscape::{run_landscape, write_landscape_csv};
use crate::harness::predict::{run_predict, write_predict_csv};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Environment variable consulted for the output directory when neither
/// `--out` nor the config file names one.
pub const OUT_DIR_ENV: &str = "LPMRL_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "lpmrl",
    version,
    about = "Shortfall-aware actor-critic experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file; built-in defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base seed, shorthand for `--override base_seed=<N>`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Trial count, shorthand for `--override trials=<N>`.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,

    /// Output directory for the experiment's CSV. Falls back to the
    /// config's `out_dir`, then `$LPMRL_OUT_DIR`, then the working
    /// directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Dotted-path config override such as `schedule.eta=0.01`;
    /// repeatable, applied in order after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    /// Overrides in ascending precedence; the dedicated flags are folded
    /// in last so `--seed`/`--trials` beat an explicit `--override` for
    /// the same key.
    fn collected_overrides(&self) -> Vec<String> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("base_seed={seed}"));
        }
        if let Some(trials) = self.trials {
            overrides.push(format!("trials={trials}"));
        }
        overrides
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact-versus-sampled objective surfaces over the two-stage tree.
    Landscape(Common),
    /// Arm-probability learning curves for three bandit objectives.
    Bandit(Common),
    /// Constraint-level sweep on the portfolio environment.
    Portfolio(Common),
    /// Constraint-level training curves on the consumption environment.
    Consumption(Common),
    /// Prediction-only shortfall-bound audit on the two-stage tree.
    Predict(Common),
    /// Parse and validate a config file without running anything.
    ValidateConfig {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if !cfg.out_dir.is_empty() {
        return PathBuf::from(&cfg.out_dir);
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

fn run_experiment(experiment: Experiment, common: &Common) -> Result<String> {
    let overrides = common.collected_overrides();
    let cfg = config::load(experiment, common.config.as_deref(), &overrides)?;
    let out_dir = resolve_out_dir(common.out.as_deref(), &cfg);
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join(experiment.csv_name());
    let mut out = BufWriter::new(File::create(&path)?);
    let summary = match experiment {
        Experiment::Landscape => {
            let rows = run_landscape(
                cfg.landscape.resolution,
                cfg.landscape.rollouts,
                cfg.base_seed,
            )?;
            write_landscape_csv(&rows, &mut out)?;
            format!("landscape: {} grid cells", rows.len())
        }
        Experiment::Bandit => {
            let curves = run_bandit_suite(&cfg)?;
            write_bandit_csv(&curves, &mut out)?;
            format!(
                "bandit: {} trials, {} checkpoints per objective",
                cfg.trials,
                curves.pulls.len()
            )
        }
        Experiment::Portfolio => {
            let rows = run_frontier(&cfg)?;
            write_frontier_csv(&rows, &mut out)?;
            let diverged = rows
                .iter()
                .filter(|r| r.status == RunStatus::Diverged)
                .count();
            format!("portfolio: {} runs, {diverged} flagged diverged", rows.len())
        }
        Experiment::Consumption => {
            let rows = run_consumption(&cfg)?;
            write_consumption_csv(&rows, &mut out)?;
            format!("consumption: {} evaluation rows", rows.len())
        }
        Experiment::Predict => {
            let rows = run_predict(&cfg)?;
            write_predict_csv(&rows, &mut out)?;
            let violations = rows.iter().filter(|r| !r.bound_ok).count();
            format!(
                "predict: {} pairs checked, {violations} bound violations",
                rows.len()
            )
        }
    };
    out.flush()?;
    Ok(format!("{summary} -> {}", path.display()))
}

/// Parse `argv` and run the selected command, returning the process exit
/// code instead of exiting so tests can call it in-process.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let outcome = match &cli.command {
        Command::Landscape(c) => run_experiment(Experiment::Landscape, c),
        Command::Bandit(c) => run_experiment(Experiment::Bandit, c),
        Command::Portfolio(c) => run_experiment(Experiment::Portfolio, c),
        Command::Consumption(c) => run_experiment(Experiment::Consumption, c),
        Command::Predict(c) => run_experiment(Experiment::Predict, c),
        Command::ValidateConfig { config } => config::load_for_validation(config)
            .map(|cfg| format!("ok: {} config, {} trials", cfg.experiment, cfg.trials)),
    };
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Diverged(_) | Error::NonFinite(_) => 2,
                _ => 1,
            }
        }
    }
}
