//! Command-line front end for minimax-regret bandwidth selection.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use crate::commands::{CurveArgs, Report, VerifyArgs};
use crate::config::{CommonArgs, RunConfig};
use crate::error::{CliError, CliResult};

pub const THREADS_ENV: &str = "REGRET_BW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "regret-bw", version = output::BUILD_ID, about = "Minimax-regret bandwidth selection for binary outcomes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bandwidth minimizing the Monte Carlo maximum regret
    Optimize(CommonArgs),
    /// Bandwidth for the Gaussian-outcome benchmark
    Normal(CommonArgs),
    /// Binary and Gaussian bandwidths for the reference grid designs
    Table1(CommonArgs),
    /// Maximum regret over a bandwidth grid
    Curve(CurveArgs),
    /// Two-anchor reduction against brute force on small random designs
    Verify(VerifyArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Optimize(a) | Command::Normal(a) | Command::Table1(a) => a,
            Command::Curve(a) => &a.common,
            Command::Verify(a) => &a.common,
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a pool may already exist when called repeatedly in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<(Report, Option<std::path::PathBuf>)> {
    configure_threads()?;
    let cfg = RunConfig::resolve(cli.command.common())?;
    let out = cfg.out.clone();
    let report = match &cli.command {
        Command::Optimize(_) => commands::optimize(cfg)?,
        Command::Normal(_) => commands::normal(cfg)?,
        Command::Table1(_) => commands::table1(cfg)?,
        Command::Curve(a) => commands::curve(cfg, a.theta_grid.as_deref())?,
        Command::Verify(a) => commands::verify(cfg, a)?,
    };
    Ok((report, out))
}

fn emit(report: &Report, out: Option<&std::path::Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, &report.body).map_err(|source| CliError::Io { path: path.to_owned(), source })
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(report.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
/// Failures are reported on stderr as a JSON error object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::Config(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = execute(&cli).and_then(|(report, out)| {
        emit(&report, out.as_deref())?;
        Ok(report.status)
    });
    match result {
        Ok(status) => status,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
