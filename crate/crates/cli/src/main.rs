//! `lpen`: batch front end for the two-point penalization calculus.
//!
//! Every run reads one JSON document
//! `{"model", "penalization", "command", "seed", "out"}` and writes CSV
//! (`h-table`, `phi`, `expect`, `limit-sweep`) or JSON (`verify`).
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
//! 4 verification failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerics(String),
    Io(String),
    VerificationFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::VerificationFailed => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerics(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::VerificationFailed => write!(f, "verification failed"),
        }
    }
}

impl From<lpen::Error> for CliError {
    fn from(e: lpen::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerics(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpen", version, about = "Two-point local-time penalization calculus for recurrent Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Table of h and h^(γ) on a grid: columns x,h,h_gamma,err_estimate.
    HTable(Common),
    /// Martingale density φ on a grid: columns x,phi_gamma,phi_plus1,phi_minus1,affine_residual.
    Phi(Common),
    /// Exact clock expectation P_x[Γ_τ], optionally with a simulation estimate.
    Expect(Common),
    /// Normalized clock expectations along a parameter ladder against the limit φ.
    LimitSweep(Common),
    /// Run the acceptance suite and write a JSON report (exit 4 on failure).
    Verify(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; all sections are optional where defaults exist.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed; overrides the seed in the configuration.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
    /// Output file; overrides "out" in the configuration (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::HTable(common)
    | Command::Phi(common)
    | Command::Expect(common)
    | Command::LimitSweep(common)
    | Command::Verify(common)) = &cli.command;
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("{}")?,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = common.out.as_deref().or(cfg.out.as_deref());
    let seed = common.seed;
    match cli.command {
        Command::HTable(_) => commands::h_table(&cfg, out),
        Command::Phi(_) => commands::phi(&cfg, out),
        Command::Expect(_) => commands::expect(&cfg, seed, out),
        Command::LimitSweep(_) => commands::limit_sweep_cmd(&cfg, seed, out),
        Command::Verify(_) => commands::verify(&cfg, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lpen: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
