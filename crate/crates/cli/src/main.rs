//! `frontlab <command> --config <path> [--out <dir>] [--seed <n>]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Fronts of nonlocal reaction-diffusion equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Critical speed, decay rates and complex branches of the dispersion relation.
    Speed(Common),
    /// Cauchy problem with front tracking and asymptotic fits.
    Simulate(Common),
    /// Travelling wave at a given speed, or at the minimal speed.
    Wave(Common),
    /// Homogeneous SI dynamics or the spatial Kendall model.
    Epidemic(Common),
    /// Tilted heat-kernel comparisons.
    Heatkernel(Common),
    /// Fit a front trace CSV.
    Fit(Common),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(frontlab::Error),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e:?}: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<frontlab::Error> for CliError {
    fn from(e: frontlab::Error) -> Self {
        use frontlab::Error as E;
        match e {
            E::BadParams(_)
            | E::NegativeSample { .. }
            | E::AsymmetricTable { .. }
            | E::UnderResolved { .. }
            | E::GridTooSmall(_)
            | E::StepTooLarge { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Speed(c) => commands::speed(c),
        Command::Simulate(c) => commands::simulate(c),
        Command::Wave(c) => commands::wave(c),
        Command::Epidemic(c) => commands::epidemic(c),
        Command::Heatkernel(c) => commands::heatkernel(c),
        Command::Fit(c) => commands::fit(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("frontlab: {e}");
            ExitCode::from(e.code())
        }
    }
}
