//! Command-line front end for `comonoflow`.
//!
//! Exit codes: 0 on success or confirmation, 1 when a property check
//! fails, 2 on input errors.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "comonoflow", version, about = "Comonotone flows of monotone Markov semigroups")]
pub struct Cli {
    /// Worker threads for batch generation; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the two-point comonotone iterate; one CSV per level.
    Simulate(RunArgs),
    /// Bridge probabilities of the three-state monotone chain.
    Counterexample(CounterexampleArgs),
    /// Ordered-cut monotonicity check of a generator file.
    CheckMonotone {
        /// Generator file: optional `labels` line, then one row per line.
        path: PathBuf,
    },
    /// Convergence table of the iterates across levels.
    Converge(RunArgs),
    /// Supermodular comparison of independent, iterated and one-step couplings.
    Dominance(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CounterexampleArgs {
    /// Bridge step: the chain is observed at times 0, t and 2t.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Replace the built-in generator.
    #[arg(long)]
    pub qmatrix: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] comonoflow::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub(crate) fn stdout(source: std::io::Error) -> Self {
        CliError::Io { path: PathBuf::from("<stdout>"), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PropertyFailed,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::PropertyFailed => 1,
        }
    }

    pub(crate) fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Success
        } else {
            Outcome::PropertyFailed
        }
    }
}

/// Exit code for an error.
pub const INPUT_ERROR: u8 = 2;

/// Runs one parsed invocation, writing reports to `out`.
pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Input(format!("cannot build thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command, out))
        }
        None => dispatch(cli.command, out),
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate(args) => commands::cmd_simulate(&args.resolve()?, out),
        Command::Counterexample(args) => commands::cmd_counterexample(args.t, args.qmatrix.as_deref(), out),
        Command::CheckMonotone { path } => commands::cmd_check_monotone(&path, out),
        Command::Converge(args) => commands::cmd_converge(&args.resolve()?, out),
        Command::Dominance(args) => commands::cmd_dominance(&args.resolve()?, out),
    }
}
