use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hfb_core::config::RunConfig;
use hfb_core::error::HfbError;
use hfb_core::harness;

/// Mean-field pair-excitation dynamics on a periodic lattice.
#[derive(Parser)]
#[command(name = "hfb", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one evolution and write config, trajectory, monitors, report
    Run {
        /// Configuration file (key = value lines); built-in defaults if omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the excitation seed from the configuration
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute the norms battery for a stored trajectory
    Norms {
        /// Trajectory container written by `run`
        #[arg(long)]
        traj: PathBuf,
        /// Configuration file supplying the analysis knobs
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path
        #[arg(long, default_value = "norms.csv")]
        out: PathBuf,
    },
    /// Run the same data across several particle numbers and aggregate norms
    Sweep {
        /// Base configuration file; the sweep default if omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated particle numbers (default 8,16,32,64,128)
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<f64>>,
        /// Members run concurrently
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Output directory
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        /// Override the shared excitation seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run acceptance checks, one pass/fail line each
    Check {
        /// Suite name; `all` runs every check
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Summarize the artifacts in a run or sweep directory
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, fallback: RunConfig) -> Result<RunConfig, HfbError> {
    match path {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?),
        None => Ok(fallback),
    }
}

fn exec(cmd: Cmd) -> Result<ExitCode, HfbError> {
    match cmd {
        Cmd::Run { config, out, seed } => {
            let mut cfg = load_config(&config, harness::reference_config())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let bundle = harness::cmd_run(&cfg, &out)?;
            print!("{}", harness::run_report(&bundle));
            println!("artifacts written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Norms { traj, config, out } => {
            let cfg = load_config(&config, harness::reference_config())?;
            let rows = harness::cmd_norms(&traj, &cfg, &out)?;
            println!("{} norm rows written to {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep { config, n_list, jobs, out, seed } => {
            let mut base = load_config(&config, harness::sweep_base_config())?;
            if let Some(s) = seed {
                base.seed = s;
            }
            let ns = n_list.unwrap_or_else(|| harness::SWEEP_N.to_vec());
            let members = harness::cmd_sweep(&base, &ns, jobs, &out)?;
            print!("{}", harness::sweep_report(&members));
            println!("{} members written to {}", members.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { suite } => {
            let outcomes = harness::cmd_check(&suite)?;
            Ok(if outcomes.iter().all(|o| o.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Report { dir } => {
            print!("{}", harness::cmd_report(&dir)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match exec(Cli::parse().cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HfbError::Usage(_) | HfbError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
