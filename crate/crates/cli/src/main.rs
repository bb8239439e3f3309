//! `epicard`: reconstruct transmembrane potentials from body-surface data.
//!
//! Subcommands: `mesh` (generate meshes + quality report), `symbol-check`
//! (operator diagnostics), `neumann` (Fredholm Neumann solve), `cauchy`
//! (regularized Cauchy solve), `pipeline` (full three-step reconstruction),
//! `convergence` (refinement studies on analytic fixtures).
//!
//! Exit codes: 0 success, 1 input error, 2 solver or compatibility error.
//! Every run writes a key-value `summary.txt` into the output directory,
//! including error details on failure.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "epicard", version, about = "Transmembrane potential reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
pub struct MeshArgs {
    /// Geometry: "annulus" (body minus heart) or "disk" (heart domain).
    #[arg(long, default_value = "annulus")]
    pub kind: String,
    #[arg(long, default_value_t = 1.0)]
    pub r_in: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_out: f64,
    /// Disk radius (disk kind only).
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Target edge length.
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(clap::Args)]
pub struct SymbolArgs {
    /// Operator description file (TOML).
    #[arg(long, conflicts_with = "builtin")]
    pub operator: Option<PathBuf>,
    /// Built-in operator: gradient | gradient-unit | cauchy-riemann | holonomic.
    #[arg(long)]
    pub builtin: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Optional output directory for the summary.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct NeumannArgs {
    #[arg(long)]
    pub operator: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    /// Conormal data as a field CSV on the INNER loop.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub ctol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_ker: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(clap::Args)]
pub struct RunArgs {
    /// Run configuration (TOML); see the repository README for the schema.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the regularization weight from the config.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the noise seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the relative noise level from the config.
    #[arg(long)]
    pub noise_level: Option<f64>,
}

#[derive(clap::Args)]
pub struct ConvergenceArgs {
    /// Fixture: zaremba-m1 | neumann-cosh | constant.
    #[arg(long)]
    pub fixture: String,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Coarsest target edge length.
    #[arg(long, default_value_t = 0.2)]
    pub h0: f64,
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an annulus or disk mesh with a quality report.
    Mesh(MeshArgs),
    /// Print operator diagnostics: injectivity margin, adjoint, ellipticity.
    SymbolCheck(SymbolArgs),
    /// Solve a Neumann problem with kernel detection and compatibility check.
    Neumann(NeumannArgs),
    /// Solve the regularized Cauchy problem (step 1 only).
    Cauchy(RunArgs),
    /// Run the full three-step reconstruction.
    Pipeline(RunArgs),
    /// Refinement study on an analytic fixture.
    Convergence(ConvergenceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Mesh(args) => commands::mesh::run(&args),
        Command::SymbolCheck(args) => commands::symbol::run(&args),
        Command::Neumann(args) => commands::neumann::run(&args),
        Command::Cauchy(args) => commands::cauchy::run(&args),
        Command::Pipeline(args) => commands::pipeline::run(&args),
        Command::Convergence(args) => commands::convergence::run(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

/// Failure with the exit code it maps to (1 input, 2 solver/compatibility).
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn from_core(err: &epicard_core::Error) -> Self {
        Self {
            code: if err.is_input_error() { 1 } else { 2 },
            message: err.to_string(),
        }
    }
}

impl From<epicard_core::Error> for CliError {
    fn from(err: epicard_core::Error) -> Self {
        CliError::from_core(&err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::input(err.to_string())
    }
}

pub type CliResult = Result<(), CliError>;
