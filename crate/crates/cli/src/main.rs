//! `hybridmap`: simulate, certify and sample hybrid semi-Markov dynamical maps.

mod commands;
mod config;
mod error;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "hybridmap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate T(t), |λ|, |μ|, the CP witness and the trace error.
    Simulate(#[command(flatten)] Io),
    /// Find the smallest uniform dephasing rate that makes the map CP.
    RestoreCp {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 10.0)]
        gamma_max: f64,
    },
    /// Closed-form det C(t) of the reference qubit for γ_z ∈ {0, 0.1, 1}.
    Fig1 {
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        t_max: f64,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
    },
    /// Monte Carlo trajectories of a semi-Markov configuration.
    Sample {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 10_000)]
        trajectories: usize,
        /// Initial level j₀.
        #[arg(long, default_value_t = 0)]
        initial_level: usize,
        /// Noise realisations for the dephasing average (noise model only).
        #[arg(long, default_value_t = 2_000)]
        noise_samples: usize,
    },
    /// Run the invariant suite on a configuration, or on the bundled
    /// reference qubit when none is given.
    Validate {
        #[arg(long, short)]
        config: Option<PathBuf>,
    },
}

fn seed_from_env() -> Result<Option<u64>, error::CliError> {
    match std::env::var("SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| error::CliError::Config(format!("SEED: expected an unsigned integer, found {s:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(error::CliError::Config(format!("SEED: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    let seed = seed_from_env()?;
    let load = |path: &PathBuf| config::load(path)?.validate(seed);
    match cli.command {
        Command::Simulate(io) => commands::simulate(&load(&io.config)?, io.output.as_deref()),
        Command::RestoreCp { io, tol, gamma_max } => {
            commands::restore_cp(&load(&io.config)?, tol, gamma_max, io.output.as_deref())
        }
        Command::Fig1 { output, t_max, steps } => commands::fig1(t_max, steps, output.as_deref()),
        Command::Sample { io, trajectories, initial_level, noise_samples } => commands::sample(
            &load(&io.config)?,
            trajectories,
            initial_level,
            noise_samples,
            io.output.as_deref(),
        ),
        Command::Validate { config } => {
            let cfg = config.as_ref().map(load).transpose()?;
            validate::run(cfg.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
