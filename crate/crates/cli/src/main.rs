//! `dupnet`: run simulations, limit curves and verification suites, writing
//! CSV files to an output directory.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config, ConfigError, ExperimentConfig, Kind};
use run::RunError;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_MODEL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "dupnet", version, about = "Storage network with file duplication: simulation and limit checks")]
struct Cli {
    /// Configuration file (`key = value` lines or a flat JSON object)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Worker threads for replica fan-out (default: available cores)
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate network trajectories
    Simulate,
    /// Fluid limit, closed form and Skorokhod-problem solution
    Fluid,
    /// Moments of the reflected SDE of the critical regime
    Critical,
    /// Decay curve of the stable regime
    Decay,
    /// Run a verification suite (or `all`)
    Verify { suite: String },
    /// Run whatever `kind` the configuration names
    Run,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut c = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    if let Some(out) = &cli.out {
        c.out = out.clone();
    }
    if let Some(r) = cli.replicas {
        if r == 0 {
            return Err(ConfigError::Invalid {
                key: "replicas",
                reason: "must be at least 1".into(),
            }
            .into());
        }
        c.replicas = Some(r);
    }
    if let Some(p) = cli.parallelism {
        if p == 0 {
            return Err(ConfigError::Invalid {
                key: "parallelism",
                reason: "must be at least 1".into(),
            }
            .into());
        }
        c.parallelism = Some(p);
    }
    Ok(c)
}

fn kind(cli: &Cli, c: &ExperimentConfig) -> Result<Kind, ConfigError> {
    let wanted = match &cli.command {
        Command::Simulate => Kind::Simulate,
        Command::Fluid => Kind::Fluid,
        Command::Critical => Kind::Critical,
        Command::Decay => Kind::Decay,
        Command::Verify { suite } => format!("verify:{suite}")
            .parse()
            .map_err(|e| ConfigError::Invalid { key: "suite", reason: e })?,
        Command::Run => return c.kind.ok_or(ConfigError::Missing("kind")),
    };
    match c.kind {
        Some(k) if k != wanted => Err(ConfigError::Invalid {
            key: "kind",
            reason: format!("config asks for `{k}` but the command is `{wanted}`"),
        }),
        _ => Ok(wanted),
    }
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    let c = load(cli)?;
    for w in &c.warnings {
        log::warn!("{w}");
    }
    let kind = kind(cli, &c)?;
    if let Some(p) = c.parallelism {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(p).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    run::run(&c, kind)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(EXIT_VERIFY_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RunError::Config(_) | RunError::Model(dupnet::Error::InvalidParam { .. }) => EXIT_USAGE,
                RunError::Io { .. } => EXIT_IO,
                RunError::Model(_) => EXIT_MODEL,
            })
        }
    }
}
