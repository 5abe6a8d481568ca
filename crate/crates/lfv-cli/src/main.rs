//! `lfv`: tables and checks for Λ-Fleming-Viot models from a measure file.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence (the
//! residual report is still written), 1 I/O failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "lfv", version, about = "Numerics for Λ-Fleming-Viot processes")]
pub struct Cli {
    /// Measure document: {"atom0": w0, "atoms": [{"y": .., "w": ..}], "beta": {"alpha": .., "w": ..}}
    #[arg(long, global = true, value_name = "FILE")]
    pub measure: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Merger rates λ_nk and totals.
    Rates(RatesArgs),
    /// Eigenvalues λ_n and stationary moments ω_n.
    Spectrum(SpectrumArgs),
    /// Probability of an allelic partition.
    Esf(EsfArgs),
    /// Fixation probability under genic selection.
    Fixation(FixationArgs),
    /// Transition row of the dual death process.
    Death(DeathArgs),
    /// Stationary density of the two-type model.
    Stationary(StationaryArgs),
    /// Frequency spectrum of the infinitely-many-alleles model.
    FrequencySpectrum(FrequencySpectrumArgs),
    /// Mean absorption time without mutation.
    Green(GreenArgs),
    /// Monte Carlo paths of the two-type process.
    Simulate(SimulateArgs),
    /// Compare the jump and Wright-Fisher forms of the generator on monomials.
    CheckGenerator(CheckGeneratorArgs),
    /// Coming-down-from-infinity criteria.
    Cdi(CdiArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 10)]
    pub n: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub theta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta2: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EsfArgs {
    /// Block sizes, e.g. "2,1,1".
    #[arg(long)]
    pub partition: String,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FixationArgs {
    #[arg(long)]
    pub beta: f64,
    /// start:stop:step
    #[arg(long, default_value = "0:1:0.05")]
    pub x_grid: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DeathArgs {
    /// Initial block count, or "inf" for the entrance law.
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StationaryArgs {
    #[arg(long, default_value_t = 1.0)]
    pub theta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta2: f64,
    #[arg(long, default_value_t = lfv_core::stationary::DEFAULT_GRID)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FrequencySpectrumArgs {
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = lfv_core::stationary::DEFAULT_GRID)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GreenArgs {
    /// Number of grid intervals; a multiple of 4.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0)]
    pub theta1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    /// Stop at this time; without it paths run until absorption.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Give up on absorption after this time.
    #[arg(long, default_value_t = 1e4, conflicts_with = "t_end")]
    pub max_time: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    /// Also write one CSV row per replicate.
    #[arg(long)]
    pub per_replicate: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckGeneratorArgs {
    #[arg(long, default_value_t = 1.0)]
    pub theta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 10)]
    pub degree: usize,
    /// Evaluation points, evenly spaced on [0, 1].
    #[arg(long, default_value_t = 21)]
    pub points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CdiArgs {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged(msg)) => {
            eprintln!("lfv: not converged: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("lfv: {e}");
            ExitCode::from(e.code())
        }
    }
}
