//! `alphadiv`: divergences, moment-constrained lower bounds, relation checks
//! and tightness sweeps from the command line.
//!
//! Exit codes: 0 success, 2 bad input, 3 argument outside the mathematical
//! domain, 4 a certification check failed, 5 no feasible construction.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::Format;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Domain(String),
    Certification(String),
    Infeasible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Certification(_) => 4,
            CliError::Infeasible(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Domain(m)
            | CliError::Certification(m)
            | CliError::Infeasible(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "alphadiv", version, about = "α- and Rényi divergences with tight moment-constrained lower bounds")]
struct Cli {
    /// Emit JSON with a run manifest.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Divergence between two finite measures.
    Div(DivArgs),
    /// Lower bound under mean and variance constraints.
    Bound(BoundArgs),
    /// Check the relations between consecutive orders along a mixture path.
    Verify(VerifyArgs),
    /// Brute-force search for pairs undercutting the bound.
    Tightness(TightnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Alpha,
    Renyi,
}

/// A pair of measures: inline lists take precedence over files.
#[derive(Args, Debug, Serialize)]
pub struct PairArgs {
    /// JSON file holding {"p": {...}, "q": {...}}.
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// JSON file holding P as {"points": [...], "weights": [...]}.
    #[arg(long)]
    pub p: Option<PathBuf>,
    /// JSON file holding Q.
    #[arg(long)]
    pub q: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p_points: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p_weights: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q_points: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q_weights: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct DivArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measures: PairArgs,
    /// Order; `inf` is accepted for Rényi divergences.
    #[arg(long)]
    pub alpha: String,
    #[arg(long, value_enum, default_value = "alpha")]
    pub kind: Kind,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SpecArgs {
    #[arg(long)]
    pub mean_p: f64,
    #[arg(long)]
    pub sigma_p: f64,
    #[arg(long)]
    pub mean_q: f64,
    #[arg(long)]
    pub sigma_q: f64,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BoundArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "alpha")]
    pub kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    DiffFwd,
    DiffBwd,
    IntFwd,
    IntBwd,
    Order,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub relation: Relation,
    #[command(flatten)]
    #[serde(flatten)]
    pub measures: PairArgs,
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub alphas: Vec<f64>,
    /// Comma-separated path parameters in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.5", allow_hyphen_values = true)]
    pub ts: Vec<f64>,
    /// Finite-difference step.
    #[arg(long, default_value_t = alphadiv::relations::DEFAULT_STEP)]
    pub h: f64,
    /// Also evaluate at h/2 and report the residual ratio.
    #[arg(long)]
    pub halving: bool,
    /// Largest accepted relative residual (1e-6 for differences, 1e-8 for
    /// integrals, 0.05 slope error for `order`).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TightnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',', num_args = 0..=1, allow_hyphen_values = true)]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 6.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 25)]
    pub grid: usize,
    #[arg(long, default_value_t = 3)]
    pub support_size: usize,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Build the three-point construction for each α < -1 instead of
    /// searching.
    #[arg(long)]
    pub counterexample: bool,
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub u3: f64,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ALPHADIV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("ALPHADIV_THREADS={raw:?} is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let format = if cli.json {
        Format::Json
    } else if cli.csv {
        Format::Csv
    } else {
        Format::Text
    };
    match &cli.command {
        Command::Div(a) => commands::div(a, format),
        Command::Bound(a) => commands::bound(a, format),
        Command::Verify(a) => commands::verify(a, format),
        Command::Tightness(a) => commands::tightness(a, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alphadiv: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
