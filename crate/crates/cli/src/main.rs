use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod table;

use config::{Format, RunConfig, SCHEMA};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "clicktime",
    version,
    about = "Detector click-time distributions and scattering time delays",
    after_long_help = SCHEMA
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (overrides output.formats)
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Seed for the randomized invariant suite
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phase shifts and their energy derivative on the k grid
    PhaseShifts,
    /// POVM invariant suite; exit 4 if any invariant fails
    PovmCheck,
    /// Free and interacting click densities of the wave packet
    Density,
    /// Time delay by density shift, Eisenbud-Wigner and operator routes
    Delay,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::defaults()?,
    };
    if let Some(out) = cli.out {
        config.directory = out;
    }
    if let Some(f) = cli.format {
        config.formats = vec![match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }];
    }
    let output = match cli.command {
        Command::PhaseShifts => commands::cmd_phase_shifts(&config)?,
        Command::PovmCheck => commands::cmd_povm_check(&config, cli.seed)?,
        Command::Density => commands::cmd_density(&config)?,
        Command::Delay => commands::cmd_delay(&config)?,
    };
    for path in table::write_all(&config.directory, &output.artifacts(&config.formats))? {
        log::info!("wrote {}", path.display());
    }
    output.verdict
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
