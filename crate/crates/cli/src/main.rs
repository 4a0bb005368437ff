//! `tofplane` batch front-end.
//!
//! Exit codes: 0 success, 1 no usable data, 2 usage or I/O failure.

mod commands;
mod config;
mod report;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tofplane",
    version,
    about = "Planar MPI correction toolkit for ToF depth frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rectify the floor of every frame in --input and write ground truth to --output
    GenerateGt(RunArgs),
    /// Score floor curvature of --input (and optionally --predicted)
    Evaluate(RunArgs),
    /// Per-frame 3D losses between --input (ground truth) and --predicted
    Losses(RunArgs),
    /// Render synthetic frames from the scene spec in --input into --output
    Simulate(RunArgs),
}

#[derive(Debug)]
pub enum Failure {
    /// Nothing usable came out of the inputs.
    Semantic(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Semantic(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Semantic(m) | Failure::Usage(m) => f.write_str(m),
        }
    }
}

impl From<tofplane::Error> for Failure {
    fn from(e: tofplane::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Handler = fn(&RunConfig) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (args, cmd): (&RunArgs, Handler) = match &cli.command {
        Command::GenerateGt(a) => (a, commands::generate_gt),
        Command::Evaluate(a) => (a, commands::evaluate),
        Command::Losses(a) => (a, commands::losses),
        Command::Simulate(a) => (a, simulate::simulate),
    };
    let cfg = args.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| cmd(&cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
