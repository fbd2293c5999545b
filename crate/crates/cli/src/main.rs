use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Audit and simulate reaction–diffusion–transport systems with Δ³ diffusion.
#[derive(Debug, Parser)]
#[command(name = "cubelap", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Grid points per axis.
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Periodic box side length.
    #[arg(long = "box", global = true)]
    pub box_len: Option<f64>,

    #[arg(long, global = true)]
    pub dt: Option<f64>,

    #[arg(long, global = true)]
    pub t_end: Option<f64>,

    /// Comma-separated probe scales.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,

    /// Tolerance: off-diagonal threshold for `audit`, deviation bound for `ode-check`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Print the report as JSON instead of the one-line summary.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a system against the structural nonnegativity conditions.
    Audit { config: PathBuf },

    /// Integrate a system and record per-component diagnostics.
    Simulate {
        config: PathBuf,
        /// `gaussian`, `const:v1,v2,...`, or a path to a state dump.
        #[arg(long, default_value = "gaussian")]
        init: String,
        /// Record every this many steps.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Force the 2/3 mask off for polynomial reactions.
        #[arg(long)]
        no_dealias: bool,
    },

    /// Evaluate a probe's leading derivative at the origin.
    Probe {
        #[arg(long, value_enum)]
        kind: ProbeArg,
        #[arg(long)]
        d: usize,
        /// Mollifier radius; defaults to 0.5 for d ≤ 2 and 0.6 for d = 3.
        #[arg(long)]
        radius: Option<f64>,
        /// Transport axis (1-based).
        #[arg(long, default_value_t = 1)]
        axis: usize,
    },

    /// Switch on one structural violation and measure the negativity it causes.
    Counterexample {
        #[arg(long, value_enum)]
        kind: ViolationArg,
        /// Pinned component (1-based).
        #[arg(long)]
        k: usize,
        /// Coupled component (1-based).
        #[arg(long, default_value_t = 2)]
        j: usize,
        /// Off-diagonal diffusion entry, or the reaction coupling for `reaction`.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        gamma: f64,
        /// Transport axis (1-based).
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Number of components; defaults to max(k, j, 2).
        #[arg(long = "components")]
        ncomp: Option<usize>,
        /// Take the reaction (and component count) from a config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        t_probe: Option<f64>,
    },

    /// Compare a spatially constant run with the reaction ODE.
    OdeCheck {
        config: PathBuf,
        /// Constant initial state, one value per component.
        #[arg(long, value_delimiter = ',')]
        u0: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    Diffusion,
    Transport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ViolationArg {
    Diffusion,
    Transport,
    Reaction,
}

pub mod exit {
    pub const OK: u8 = 0;
    pub const FAIL: u8 = 2;
    pub const WARN: u8 = 3;
    pub const USAGE: u8 = 4;
    pub const RUNTIME: u8 = 5;
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
