//! Command-line driver: curvature tables, marching, reconstruction,
//! verification and gas reference tables.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{CliError, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

pub const THREADS_ENV: &str = "GCFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gcflow", version, about = "Gauss-Codazzi marching solver and surface reconstruction")]
pub struct Cli {
    /// Worker threads (default: GCFLOW_THREADS, else one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate Gauss curvature on a node grid as CSV `x,y,kappa`.
    Curvature(CurvatureArgs),
    /// March the configured initial data and write `field.csv` and `diagnostics.json`.
    Solve(RunArgs),
    /// Rebuild the surface from a marched field and write `mesh.obj` and `mesh.json`.
    Reconstruct(ReconstructArgs),
    /// Residual report for a field CSV.
    Verify(VerifyArgs),
    /// Reference table `q,rho,c,type` for a polytropic or isothermal gas.
    Gasref(GasrefArgs),
    /// Solve, reconstruct and verify one configuration.
    Pipeline(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurvatureMode {
    Analytic,
    Fd,
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    /// Builtin metric tag.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub metric: Option<String>,
    /// Take the metric and domain from a run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y1: Option<f64>,
    /// Nodes in x.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Nodes in y (default: same as `--n`).
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long, value_enum, default_value_t = CurvatureMode::Analytic)]
    pub mode: CurvatureMode,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Field CSV (default: `field.csv` in the output directory).
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub metric: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GasrefArgs {
    /// Adiabatic exponent; 1 selects the isothermal gas.
    #[arg(long, default_value_t = 1.4)]
    pub gamma: f64,
    #[arg(long, default_value_t = 101)]
    pub n: usize,
    /// Isothermal sound speed.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Isothermal stagnation density.
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return if n == 0 { Err(CliError::Usage("--threads must be positive".into())) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Parse `argv`, run the command, and return the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Curvature(a) => commands::curvature(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Gasref(a) => commands::gasref(&a),
        Command::Pipeline(a) => commands::pipeline(&a),
    })
}
