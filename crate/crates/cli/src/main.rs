use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fup_core::ErrorKind;
use serde::Serialize;

mod commands;
mod config;
mod output;
mod verify;

use config::{FileConfig, Format, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Core(fup_core::Error),
    Usage(String),
    Io(std::io::Error),
    /// Checks ran but some failed.
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Cap => 2,
                ErrorKind::Invariant => 3,
            },
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Failed(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<fup_core::Error> for CliError {
    fn from(e: fup_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fup",
    version,
    about = "Fourier restriction norms and concentration experiments for discrete Cantor sets"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON file with seed, threads, format, output and limits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: FUP_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Largest N = M^k for Cantor-set transforms.
    #[arg(long, global = true)]
    n_cap: Option<u64>,
    /// Largest alphabet space enumerated exactly.
    #[arg(long, global = true)]
    enum_cap: Option<u64>,
    /// Largest permutation space enumerated exactly.
    #[arg(long, global = true)]
    perm_cap: Option<u64>,
    /// Largest alphabet for the dense Gram route.
    #[arg(long, global = true)]
    dense_cap: Option<usize>,
    /// Largest N for a dense open quantum map.
    #[arg(long, global = true)]
    oqm_cap: Option<u64>,
}

/// Exact enumeration or a seeded Monte Carlo sample.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModeArgs {
    /// Enumerate the whole alphabet space (default).
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    /// Draw this many alphabets instead of enumerating.
    #[arg(long, value_name = "SAMPLES")]
    pub mc: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// r_k and beta_k for one alphabet, k = 1..kmax.
    Beta(commands::BetaArgs),
    /// Mean exponents over a whole space, or the dimension-curve dataset.
    Sweep(commands::SweepArgs),
    /// Empirical tails of an exponential sum against concentration bounds.
    Concentration(commands::ConcentrationArgs),
    /// Measure of the square-root-cancellation good set.
    Goodset(commands::GoodsetArgs),
    /// Norm and spectral radius of open quantum maps.
    Oqm(commands::OqmArgs),
    /// Run the invariant suite; exits 3 on any failure.
    Verify(verify::VerifyArgs),
}

fn to_value<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialise")
}

impl Command {
    fn name_and_args(&self) -> (&'static str, serde_json::Value) {
        match self {
            Command::Beta(a) => ("beta", to_value(a)),
            Command::Sweep(a) => ("sweep", to_value(a)),
            Command::Concentration(a) => ("concentration", to_value(a)),
            Command::Goodset(a) => ("goodset", to_value(a)),
            Command::Oqm(a) => ("oqm", to_value(a)),
            Command::Verify(a) => ("verify", to_value(a)),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let file = g.config.as_deref().map(FileConfig::load).transpose()?;
    let flags = Overrides {
        seed: g.seed,
        threads: g.threads,
        format: g.format,
        output: g.output,
        n_cap: g.n_cap,
        enumeration_cap: g.enum_cap,
        permutation_cap: g.perm_cap,
        dense_cap: g.dense_cap,
        oqm_dense_cap: g.oqm_cap,
    };
    let (name, args) = cli.command.name_and_args();
    let cfg = RunConfig::resolve(name, args, flags, file)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    match &cli.command {
        Command::Beta(a) => commands::beta(&cfg, a),
        Command::Sweep(a) => commands::sweep(&cfg, a),
        Command::Concentration(a) => commands::concentration(&cfg, a),
        Command::Goodset(a) => commands::goodset(&cfg, a),
        Command::Oqm(a) => commands::oqm(&cfg, a),
        Command::Verify(a) => verify::run(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
