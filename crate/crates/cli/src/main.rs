//! `pipenet`: build, analyze and simulate `.pipenet` network descriptions.
//!
//! Every command parses and elaborates the whole file before writing any
//! output. CSV goes to stdout unless `--output` is given.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pipenet", version, about = "Linear gas pipe network models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
pub struct Common {
    /// Network description file.
    pub file: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Comma-separated outputs (declared names or canonical labels).
    #[arg(long, value_delimiter = ',')]
    pub select: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print dimensions and signal labels of the closed model.
    Build {
        #[command(flatten)]
        common: Common,
        /// Directory receiving A.csv, B.csv, C.csv and D.csv.
        #[arg(long, value_name = "DIR")]
        dump_matrices: Option<PathBuf>,
    },
    /// Steady-state gains from the external inputs.
    Dcgain {
        #[command(flatten)]
        common: Common,
        /// Rows are the inlet flows of every pipe instead of the outputs.
        #[arg(long)]
        flows_only: bool,
    },
    /// Eigenvalues of the closed model.
    Eig {
        #[command(flatten)]
        common: Common,
    },
    /// Frequency response magnitudes and phases.
    Bode {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        wmin: f64,
        #[arg(long, default_value_t = 1e3)]
        wmax: f64,
        /// Number of log-spaced frequencies.
        #[arg(long, short = 'n', default_value_t = 601)]
        points: usize,
    },
    /// Simulate the linear model driven by deviation inputs from a CSV.
    Sim {
        #[command(flatten)]
        common: Common,
        /// Input CSV: column `t`, then one column per external input
        /// (declared name or canonical label).
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        dt: f64,
        /// End time; inputs are held past their last sample.
        #[arg(long = "t-end")]
        t_end: f64,
    },
    /// Cross-check the closed model against the loop formula.
    Mason {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        wmin: f64,
        #[arg(long, default_value_t = 1e3)]
        wmax: f64,
        #[arg(long, short = 'n', default_value_t = 20)]
        points: usize,
    },
    /// Largest eigenvalue real part while one gain element is varied.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Gain element to vary.
        #[arg(long)]
        element: String,
        #[arg(long)]
        kmin: f64,
        #[arg(long)]
        kmax: f64,
        /// Number of linearly spaced values.
        #[arg(long, short = 'n', default_value_t = 50)]
        points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build { common, dump_matrices } => commands::build(&common, dump_matrices.as_deref()),
        Command::Dcgain { common, flows_only } => commands::dcgain(&common, flows_only),
        Command::Eig { common } => commands::eig(&common),
        Command::Bode { common, wmin, wmax, points } => commands::bode(&common, wmin, wmax, points),
        Command::Sim { common, inputs, dt, t_end } => commands::sim(&common, &inputs, dt, t_end),
        Command::Mason { common, wmin, wmax, points } => commands::mason(&common, wmin, wmax, points),
        Command::Sweep { common, element, kmin, kmax, points } => {
            commands::sweep(&common, &element, kmin, kmax, points)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
