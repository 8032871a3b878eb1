//! The `uailab` command line: argument grammar, config handling and
//! dispatch to the core library.

pub mod config;
mod commands;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{load_config, parse_config, RunConfig, SchemaError};
pub use report::{Report, Table};

#[derive(Debug, Parser)]
#[command(name = "uailab", version, about = "Brackets for universal priors, knowledge-seeking values and BayesExp episodes")]
pub struct Cli {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Brackets for M, conditional M, M_norm and the measure mixture
    #[command(subcommand)]
    Prior(PriorCommand),
    /// Inspect environment class files
    #[command(subcommand)]
    Env(EnvCommand),
    /// Evaluate value functions
    #[command(subcommand)]
    Value(ValueCommand),
    /// Run the BayesExp agent
    #[command(subcommand)]
    Agent(AgentCommand),
    /// Regenerate the reference results
    #[command(subcommand)]
    Repro(ReproCommand),
}

#[derive(Debug, Clone, Args)]
pub struct MachineArgs {
    /// Machine id (toy, reference, dispatch, dispatch:<relation>)
    #[arg(long)]
    pub machine: Option<String>,
    /// Dovetail phase index j: prefixes up to j bits, j*2^j steps each
    #[arg(long, conflicts_with_all = ["max_len", "steps"])]
    pub budget: Option<u32>,
    /// Explicit maximal prefix length
    #[arg(long, requires = "steps")]
    pub max_len: Option<u32>,
    /// Explicit step budget per prefix
    #[arg(long, requires = "max_len")]
    pub steps: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum PriorCommand {
    /// Bracket M(x)
    M {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value = "")]
        x: String,
    },
    /// Bracket M(xy | x)
    Cond {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Bracket the Solomonoff-normalized M_norm(x)
    Mnorm {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value = "")]
        x: String,
    },
    /// Depth-n approximation towards the measure mixture MM(x)
    Mm {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long)]
        depth: u32,
    },
    /// The adversarial sequence against M
    Adversarial {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long)]
        length: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum EnvCommand {
    /// Check a class file and print a one-line summary
    Validate {
        /// Class file path or builtin:<name>
        #[arg(long)]
        class: String,
    },
    /// Print a class in canonical JSON
    Show {
        #[arg(long)]
        class: String,
    },
    /// Derive a class of deterministic environments from machine programs
    Derive {
        #[arg(long)]
        machine: Option<String>,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 1)]
        obs_bits: u32,
        #[arg(long, default_value_t = 8)]
        max_len: u32,
        #[arg(long, default_value_t = 256)]
        steps: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Entropy,
    Info,
    Reward,
}

#[derive(Debug, Subcommand)]
pub enum ValueCommand {
    /// Optimal value, per-action values and best action after a history
    Eval {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        class: String,
        /// Comma-separated ACTION/PERCEPT pairs
        #[arg(long, default_value = "")]
        history: String,
        /// Number of future steps (lifetime t + N - 1)
        #[arg(long)]
        horizon: usize,
        /// Use the normalized mixture (entropy only)
        #[arg(long)]
        normalized: bool,
        /// geometric:R or table:G1,G2,... (reward only)
        #[arg(long)]
        discount: Option<String>,
        /// Also report the least eps-optimal action
        #[arg(long)]
        eps: Option<f64>,
        /// Cross-check against the brute-force policy enumeration
        #[arg(long)]
        oracle: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum AgentCommand {
    /// Run an episode and write trace.csv and summary.json
    Run {
        #[arg(long)]
        class: Option<String>,
        /// Name of the true environment within the class
        #[arg(long)]
        true_env: String,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReproCommand {
    /// Unnormalized versus normalized entropy-seeking on the two-environment example
    Example1,
    /// The adversarial sequence and its prefix masses
    Adversarial {
        #[arg(long, default_value_t = 4)]
        length: usize,
        /// Dovetail phase index
        #[arg(long, default_value_t = 12)]
        budget: u32,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Domain(#[from] uailab_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Schema(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

/// Parses `argv` (including the program name), runs the command, prints
/// errors to stderr and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(output) => {
            print!("{output}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    commands::execute(&cli.command, &config)
}
