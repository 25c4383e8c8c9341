//! `vscl`: command-line front end for VSCL plate reliability studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vscl_cli::commands::{self, Context};
use vscl_cli::config::StudyConfig;
use vscl_cli::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "vscl", version, about = "Reliability of variable-stiffness composite plates with cutouts")]
struct Cli {
    /// Study configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the study seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// FEM cache directory; caching is off unless set here or in the config.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequencies of the deterministic plate on a sequence of meshes.
    ValidateFem,
    /// FEM-evaluated Latin hypercube design and surrogate training.
    Train,
    /// Failure probability with the chosen method.
    Reliability {
        #[arg(value_enum)]
        method: ReliabilityMethod,
    },
    /// Garson and total-effect sensitivity indices on the trained net.
    Sensitivity,
    /// Summary of the results in the output directory.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReliabilityMethod {
    Form,
    Sorm,
    Mcs,
    Mcis,
    Adaptive,
}

impl ReliabilityMethod {
    fn name(self) -> &'static str {
        match self {
            ReliabilityMethod::Form => "form",
            ReliabilityMethod::Sorm => "sorm",
            ReliabilityMethod::Mcs => "mcs",
            ReliabilityMethod::Mcis => "mcis",
            ReliabilityMethod::Adaptive => "adaptive",
        }
    }
}

fn context(cli: &Cli) -> CliResult<Context> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("--config is required for this command"))?;
    let mut config = StudyConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
    let cache = cli.cache.clone().or_else(|| config.output.cache.clone());
    Ok(Context { config, out, cache })
}

fn run(cli: &Cli) -> CliResult<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Report => {
            let out = match (&cli.out, &cli.config) {
                (Some(o), _) => o.clone(),
                (None, Some(_)) => context(cli)?.out,
                (None, None) => return Err(CliError::config("report needs --out or --config")),
            };
            commands::cmd_report(&out)
        }
        Command::ValidateFem => commands::validate_fem(&context(cli)?),
        Command::Train => commands::cmd_train(&context(cli)?),
        Command::Reliability { method } => commands::cmd_reliability(&context(cli)?, method.name()),
        Command::Sensitivity => commands::cmd_sensitivity(&context(cli)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                eprintln!("{}", CliError::config(e.to_string().lines().next().unwrap_or("bad arguments")));
                return ExitCode::from(2);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
