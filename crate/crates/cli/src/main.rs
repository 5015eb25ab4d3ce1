//! `betaloc`: simulate, fit and compare time-varying Beta models.

use std::ffi::OsString;
use std::process::ExitCode;

use beta_loclik::kernel::{Degree, KernelFamily};
use beta_loclik::loclik::Optimizer;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod baseline;
mod bench;
mod cohort;
mod error;
mod evaluate;
mod fit;
mod io;
mod select;
mod simulate;
mod svg;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "betaloc", version, about = "Local likelihood fitting of Beta models with time-varying parameters")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a toy dataset or multilevel day curves.
    Simulate(simulate::SimulateArgs),
    /// Fit alpha(t), beta(t) on a regular grid.
    Fit(fit::FitArgs),
    /// Score a bandwidth grid by cross-validation.
    SelectBandwidth(select::SelectArgs),
    /// Moments + FPCA estimates for a multilevel dataset.
    Baseline(baseline::BaselineArgs),
    /// Distances, scores and principal directions for a set of curves.
    Cohort(cohort::CohortArgs),
    /// Mean out-of-sample log-likelihood of fitted curves.
    Evaluate(evaluate::EvaluateArgs),
    /// Wall-clock timings of fits and CV criteria.
    Bench(bench::BenchArgs),
}

/// Clock used by time columns and bandwidths on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimeUnit {
    /// Time already on [0,1].
    Unit,
    /// Hours of a 24h day, mapped by t/24.
    Hours24,
}

impl TimeUnit {
    pub fn scale(self) -> f64 {
        match self {
            TimeUnit::Unit => 1.0,
            TimeUnit::Hours24 => 24.0,
        }
    }

    pub fn ingest(self, t: f64) -> f64 {
        t / self.scale()
    }

    pub fn emit(self, t: f64) -> f64 {
        t * self.scale()
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelOpts {
    #[arg(long, default_value = "gaussian")]
    pub kernel: KernelFamily,
    #[arg(long, default_value = "linear")]
    pub degree: Degree,
    #[arg(long, default_value = "newton")]
    pub optimizer: Optimizer,
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let msg = e.to_string();
            return Err(CliError::Usage(msg.trim_start_matches("error: ").trim_end().to_string()));
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Fit(a) => fit::run(a),
        Command::SelectBandwidth(a) => select::run(a),
        Command::Baseline(a) => baseline::run(a),
        Command::Cohort(a) => cohort::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Bench(a) => bench::run(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("betaloc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
