//! `eqcentre`: ingest ephemerides, preprocess them into residuals, search
//! for the equation of the centre, and audit the results.

mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "eqcentre", version, about = "Rediscover the equation of the centre from ephemerides")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Options shared by every command. Dedicated flags beat `--set`, which
/// beats the config file.
#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set window=9`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=3))]
    experiment: Option<u32>,
    #[arg(long, global = true)]
    max_nodes: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a Horizons table or CSV (or fetch one) and write the toolkit CSV.
    Ingest,
    /// Turn observations into per-cycle anomaly residuals.
    Preprocess,
    /// Run the symbolic regression preset on a residual table.
    Discover,
    /// Repeat preprocessing and discovery across candidate reference frames.
    Frames,
    /// Tabulate the exact centre against its Bessel series and first-order term.
    Oracle,
    /// Generate a Keplerian dataset with its ground truth.
    Synth,
    /// Print the resolved configuration and its hash.
    Config,
}

#[derive(Debug)]
pub enum CliError {
    Core(eqcentre::Error),
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for bad input or configuration, 3 for transport, 4 for everything
    /// the numerics or the search reject.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(e) if e.is_transport_error() => 3,
            CliError::Core(_) => 4,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<eqcentre::Error> for CliError {
    fn from(e: eqcentre::Error) -> Self {
        CliError::Core(e)
    }
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut overrides = common.set.iter().map(|s| config::parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let mut flag = |key: &str, value: Option<toml::Value>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| toml::Value::String(p.display().to_string()));
    let int = |n: Option<u64>| n.map(|n| toml::Value::Integer(n as i64));
    flag("input", path(&common.input));
    flag("output_dir", path(&common.output_dir));
    flag("experiment", int(common.experiment.map(u64::from)));
    flag("max_nodes", int(common.max_nodes.map(|n| n as u64)));
    flag("workers", int(common.workers.map(|n| n as u64)));
    flag("seed", int(common.seed));
    RunConfig::resolve(common.config.as_deref(), overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Discover => commands::discover(&cfg),
        Command::Frames => commands::frames(&cfg),
        Command::Oracle => commands::oracle(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Config => {
            println!("# config_hash={}", cfg.hash());
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
