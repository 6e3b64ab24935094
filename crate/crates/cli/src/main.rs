use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dkpp_cli::{cmd_certify, cmd_emit_plot, cmd_march, cmd_solve, cmd_study, CliError, PlotKind, RunConfig, StudyMode};

#[derive(Parser)]
#[command(name = "dkpp", version, about = "Nonlocal fractional KPP solver: certify, solve, march, study")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check assumptions and print the contraction certificate.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Picard iteration on one window.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Add residual, contraction and stationarity checks to the report.
        #[arg(long)]
        verify: bool,
        /// Iterate even when the contraction constant is at least one.
        #[arg(long)]
        allow_uncertified: bool,
    },
    /// Chain certified windows up to a total time.
    March {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        total_time: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convergence studies: dt, N, picard or contraction.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Flatten run artifacts to CSV.
    EmitPlot {
        #[arg(long)]
        run: PathBuf,
        /// field, norms or residuals
        #[arg(long)]
        what: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DKPP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("DKPP_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_threads()?;
    match cli.command {
        Command::Certify { config, out } => cmd_certify(&RunConfig::load(&config)?, out.as_deref()),
        Command::Solve { config, out, seed, verify, allow_uncertified } => {
            cmd_solve(&RunConfig::load(&config)?, out.as_deref(), verify, allow_uncertified, seed)
        }
        Command::March { config, out, total_time, seed } => {
            cmd_march(&RunConfig::load(&config)?, out.as_deref(), total_time, seed)
        }
        Command::Study { config, out, mode, seed } => {
            let mode: StudyMode = mode.parse()?;
            cmd_study(&RunConfig::load(&config)?, out.as_deref(), mode, seed)
        }
        Command::EmitPlot { run, what, out } => {
            let what: PlotKind = what.parse()?;
            cmd_emit_plot(&run, what, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
