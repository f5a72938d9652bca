//! `mimoloc` command-line front end.
//!
//! Exit codes: 0 success, 1 Monte Carlo ratio outside its tolerance band,
//! 2 usage or config error, 3 I/O error, 4 numerical degeneracy.

mod commands;
mod config;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BoundMode, OptimizeArgs, SimMode};
use error::{CliError, EXIT_TOLERANCE};

#[derive(Debug, Parser)]
#[command(name = "mimoloc", version, about = "Localization bounds, GDOP maps and estimator checks for distributed MIMO radar")]
struct Cli {
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the parallel loops (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coherent and/or non-coherent CRLB at the configured target.
    Crlb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = BoundMode::Both)]
        mode: BoundMode,
    },
    /// Write a GDOP raster over the configured region as CSV.
    Gdop {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search bearing angles minimizing the coherent CRLB trace.
    Optimize {
        /// Number of transmitters.
        #[arg(short = 'm', long)]
        transmitters: usize,
        /// Number of receivers.
        #[arg(short = 'n', long)]
        receivers: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coherent noise scale the traces are expressed in.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
    },
    /// Linearized BLUE position fix from path delays.
    Blue {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo check of the BLUE against its covariance.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = SimMode::Analytic)]
        mode: SimMode,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already set up: {e}");
        }
    }
    let (text, code) = match cli.command {
        Command::Crlb { config, mode } => (commands::run_crlb(&config::load(&config)?, mode)?.render(cli.json), 0),
        Command::Gdop { config, out } => (commands::run_gdop(&config::load(&config)?, &out)?.render(cli.json), 0),
        Command::Optimize { transmitters, receivers, restarts, seed, eta } => {
            let args = OptimizeArgs { transmitters, receivers, restarts, seed, eta };
            (commands::run_optimize(&args)?.render(cli.json), 0)
        }
        Command::Blue { config } => (commands::run_blue(&config::load(&config)?)?.render(cli.json), 0),
        Command::Simulate { config, mode, trials, seed } => {
            let report = commands::run_simulate(&config::load(&config)?, mode, trials, seed)?;
            let code = if report.result.within_tolerance { 0 } else { EXIT_TOLERANCE };
            (report.render(cli.json), code)
        }
    };
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIMOLOC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
