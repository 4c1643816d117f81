//! `nsper`: build, check and measure periodic and nonstationary wavelet frames
//! from mask tables.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Core(#[from] nsper_core::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        use nsper_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(..) => 2,
            CliError::Core(
                E::Io(_)
                | E::Json(_)
                | E::UnknownFamily(_)
                | E::InvalidArgument(_)
                | E::UnsupportedOrder(_)
                | E::LevelTooSmall(_)
                | E::LevelLength { .. }
                | E::NonContiguous { .. }
                | E::InvalidTable(_),
            ) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nsper", version, about = "Periodic and nonstationary wavelet frames from mask tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Check the table invariants
    Validate,
    /// Fit phase splines and check the lifted masks
    Lift,
    /// Build periodic and nonstationary frame levels and check the extension conditions
    Build,
    /// Compare periodized lifted levels with the periodic build
    Periodize,
    /// Breitenberger and Heisenberg constants per level
    Uc,
    /// Condition checks and constants per level
    Experiment,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Lift => "lift",
            Command::Build => "build",
            Command::Periodize => "periodize",
            Command::Uc => "uc",
            Command::Experiment => "experiment",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = RunConfig::load(&cli.overrides)?;
    let mut out = commands::Output::new(&cfg, cli.command.name())?;
    let ok = match cli.command {
        Command::Validate => commands::validate(&cfg, &mut out)?,
        Command::Lift => commands::lift(&cfg, &mut out)?,
        Command::Build => commands::build(&cfg, &mut out)?,
        Command::Periodize => commands::periodize(&cfg, &mut out)?,
        Command::Uc => commands::uc(&cfg, &mut out)?,
        Command::Experiment => commands::experiment(&cfg, &mut out)?,
    };
    out.finish(ok)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nsper: {e}");
            ExitCode::from(e.code())
        }
    }
}
