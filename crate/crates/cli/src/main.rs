//! `kolmo`: batch front end for the continuity toolkit.
//!
//! Exit codes: 0 pass, 1 usage or config error, 2 a checked condition
//! fails, 3 inconclusive.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::VerifySet;
use config::{load, SpdeRunConfig};
use output::{CliError, Run, Status};

#[derive(Parser)]
#[command(
    name = "kolmo",
    version,
    about = "Admissibility checks, chaining experiments and jump-driven SPDE runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continuity moduli.
    Modulus {
        #[command(subcommand)]
        action: ModulusAction,
    },
    /// Dyadic chaining on sampled fields.
    Chain {
        #[command(subcommand)]
        action: ChainAction,
    },
    /// Poisson random measures and moment inequalities.
    Levy {
        #[command(subcommand)]
        action: LevyAction,
    },
    /// Mild solutions of the jump-driven fractional heat equation.
    Spde {
        #[command(subcommand)]
        action: SpdeAction,
    },
}

#[derive(Subcommand)]
enum ModulusAction {
    /// Dyadic sum, ratio condition, axioms and theta window.
    Check(Common),
}

#[derive(Subcommand)]
enum ChainAction {
    /// Per-level increments, seminorms against the chaining bound, moment fit.
    Estimate(Common),
}

#[derive(Subcommand)]
enum LevyAction {
    /// Atom counts, isometry and Kunita-type ratios.
    Verify(Common),
}

#[derive(Subcommand)]
enum SpdeAction {
    /// Simulate the ensemble and emit the selected reports.
    Run(SpdeArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SpdeArgs {
    #[command(flatten)]
    common: Common,
    /// Report sets, comma separated; all of them by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    verify: Vec<VerifySet>,
}

impl Common {
    fn config_path(&self) -> Result<&Path, CliError> {
        self.config
            .as_deref()
            .ok_or_else(|| CliError::usage("--config is required"))
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}"))),
        _ => Ok(()),
    }
}

fn dispatch(command: Command) -> Result<Status, CliError> {
    match command {
        Command::Modulus {
            action: ModulusAction::Check(args),
        } => {
            let mut cfg: config::ModulusCheckConfig = load(args.config_path()?)?;
            set_threads(args.threads)?;
            let mut run = Run::new(&args.out, "modulus check", args.threads)?;
            let status = commands::modulus_check(&mut cfg, &mut run)?;
            run.finish(&cfg, args.seed, status)
        }
        Command::Chain {
            action: ChainAction::Estimate(args),
        } => {
            let mut cfg: config::ChainConfig = load(args.config_path()?)?;
            cfg.seed = args.seed.unwrap_or(cfg.seed);
            set_threads(args.threads)?;
            let mut run = Run::new(&args.out, "chain estimate", args.threads)?;
            let status = commands::chain_estimate(&mut cfg, &mut run)?;
            run.finish(&cfg, Some(cfg.seed), status)
        }
        Command::Levy {
            action: LevyAction::Verify(args),
        } => {
            let mut cfg: config::LevyVerifyConfig = load(args.config_path()?)?;
            cfg.seed = args.seed.unwrap_or(cfg.seed);
            set_threads(args.threads)?;
            let mut run = Run::new(&args.out, "levy verify", args.threads)?;
            let status = commands::levy_verify(&cfg, &mut run)?;
            run.finish(&cfg, Some(cfg.seed), status)
        }
        Command::Spde {
            action: SpdeAction::Run(args),
        } => {
            let common = args.common;
            let mut cfg = match &common.config {
                Some(path) => load(path)?,
                None => SpdeRunConfig::default_experiment(),
            };
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            let verify = if args.verify.is_empty() {
                vec![VerifySet::Modulus, VerifySet::Sup, VerifySet::Kunita]
            } else {
                args.verify
            };
            set_threads(common.threads)?;
            let mut run = Run::new(&common.out, "spde run", common.threads)?;
            let status = commands::spde_run(&mut cfg, &verify, &mut run)?;
            run.finish(&cfg, Some(cfg.seed), status)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
