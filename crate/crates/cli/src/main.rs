//! `pdecomp`: counting, search, solving and simulation of policy
//! decompositions from the command line.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags, unknown model,
//! malformed tree or configuration), 1 for failures while running. Errors are
//! printed to stderr as a single JSON object.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decomp_core::dp::DecoupledInputs;
use decomp_core::Error;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "pdecomp", version, about = "Policy decomposition toolkit")]
pub struct Cli {
    /// Worker threads; 1 selects deterministic mode.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "PDECOMP_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Number of decompositions N(n, m) and its per-(r, k) breakdown.
    Count(Dims),
    /// Every decomposition, one canonical tree string per line.
    Enumerate {
        #[command(flatten)]
        dims: Dims,
        /// Refuse to list more than this many trees.
        #[arg(long, default_value_t = decomp_core::enumeration::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
    /// Uniformly sampled decompositions.
    Sample {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// LQR value error and fitness of one tree.
    Estimate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        tree: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for the fittest decomposition.
    Search {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "ga")]
        method: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Pareto front over (F_err, F_comp).
    Pareto {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Solve the policies of a decomposition on a grid.
    Solve {
        #[arg(long)]
        model: String,
        #[arg(long)]
        tree: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Grid points along every state axis.
        #[arg(long)]
        points: Option<usize>,
        /// Action samples along every input axis.
        #[arg(long)]
        actions: Option<usize>,
        /// Value of inputs decoupled from a subsystem: trim or zero.
        #[arg(long, default_value = "trim", value_parser = parse_decoupled)]
        decoupled: DecoupledInputs,
        /// Recorded in the policy header; solving itself is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-loop trajectory of a solved policy.
    Simulate {
        #[arg(long)]
        policy: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Converged/diverged map over a 2-D slice of initial states.
    Basin {
        #[arg(long)]
        policy: PathBuf,
        /// Two state variables to vary, by name or as x1, x2, ...
        #[arg(long, value_delimiter = ',')]
        slice: Vec<String>,
        /// Points per slice axis.
        #[arg(long, default_value_t = 21)]
        resolution: usize,
        /// Fixed coordinates, comma separated; defaults to the goal state.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        base: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
pub struct Dims {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub m: u32,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    #[arg(long)]
    pub budget_steps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Convergence threshold on the Q-weighted distance to the goal at the
    /// final time. Defaults to the weighted diagonal of one grid cell.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn parse_decoupled(s: &str) -> Result<DecoupledInputs, String> {
    match s {
        "trim" => Ok(DecoupledInputs::Trim),
        "zero" => Ok(DecoupledInputs::Zero),
        _ => Err(format!("expected trim or zero, got '{s}'")),
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage".into(),
            message: message.into(),
        }
    }

    pub fn runtime(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind: kind.into(),
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::UnknownModel(_) => (2, "unknown_model"),
            Error::Config(_) => (2, "config"),
            Error::Parse { .. } => (2, "tree_parse"),
            Error::InvalidTree(_) => (2, "invalid_tree"),
            Error::Dimension(_) => (2, "dimension"),
            Error::NoDecompositions { .. } => (2, "no_decompositions"),
            Error::EnumerationCap { .. } => (1, "enumeration_cap"),
            Error::NotAnEquilibrium { .. } => (1, "not_an_equilibrium"),
            Error::Unstabilizable(_) => (1, "unstabilizable"),
            Error::Lyapunov(_) => (1, "lyapunov"),
            Error::Dynamics(_) => (1, "dynamics"),
            Error::Grid(_) => (1, "grid"),
            Error::PolicyFormat(_) => (1, "policy_format"),
            Error::UnknownNode(_) => (1, "unknown_node"),
            Error::Io(_) => (1, "io"),
        };
        Failure {
            code,
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime("io", e.to_string())
    }
}

fn report(f: &Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": f.kind, "message": f.message, "exit_code": f.code } }));
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            return report(&Failure::usage(message.join(" ").trim_start_matches("error: ")));
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
