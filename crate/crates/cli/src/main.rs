//! `specsmooth`: batch experiments on spectral projectors and local
//! smoothing for one-dimensional Schrödinger operators.
//!
//! Exit codes: 0 success, 2 config/validation/I/O error, 3 self-check failure.

mod commands;
mod config;
mod error;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Context;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "specsmooth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ThetaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exponent q in [2, inf]; `inf` is accepted.
    #[arg(allow_negative_numbers = true)]
    q: Option<f64>,
    #[arg(allow_negative_numbers = true)]
    k: Option<f64>,
    /// Required when q = 4.
    #[arg(allow_negative_numbers = true)]
    eta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenpairs, residuals and optional convergence table.
    Eigen(Common),
    /// Weighted eigenfunction decay, fitted exponent and gap profile.
    Decay(Common),
    /// Smoothing constant with truncation table and quadrature self-check.
    Smoothing(Common),
    /// Smoothing constant against the bin-wise projector norms.
    Equivalence(Common),
    /// Free band kernel sweep and uniform bound.
    Free(Common),
    /// The exponent theta(q, k).
    Theta(ThetaArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SPECSMOOTH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("SPECSMOOTH_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn read(path: &Path) -> CliResult<(Vec<u8>, config::ExperimentConfig)> {
    let raw = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| CliError::Config(format!("{} is not valid UTF-8", path.display())))?;
    Ok((raw, config::parse(&text)?))
}

fn run_with(common: &Common, f: fn(&Context) -> CliResult<()>) -> CliResult<()> {
    let (raw, config) = read(&common.config)?;
    f(&Context {
        raw: &raw,
        config: &config,
        out: &common.out,
    })
}

fn run_theta(args: &ThetaArgs) -> CliResult<()> {
    let (q, k, eta, raw) = match (args.q, args.k) {
        (Some(q), Some(k)) => {
            let text = format!("{q} {k} {}", args.eta.map(|e| e.to_string()).unwrap_or_default());
            (q, k, args.eta, text.into_bytes())
        }
        (Some(_), None) => return Err(CliError::Config("theta needs both q and k".into())),
        _ => {
            let path = args
                .config
                .as_ref()
                .ok_or_else(|| CliError::Config("theta needs `q k [eta]` or --config".into()))?;
            let (raw, config) = read(path)?;
            let t = config::section(&config.theta, "theta")?;
            (t.q, t.k, t.eta, raw)
        }
    };
    commands::theta(q, k, eta, &raw, args.out.as_deref())?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Eigen(c) => run_with(c, commands::eigen),
        Command::Decay(c) => run_with(c, commands::decay),
        Command::Smoothing(c) => run_with(c, commands::smoothing),
        Command::Equivalence(c) => run_with(c, commands::equivalence),
        Command::Free(c) => run_with(c, commands::free),
        Command::Theta(a) => run_theta(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specsmooth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
