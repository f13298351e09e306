//! `hyplab`: run one experiment per subcommand and emit CSV series plus a
//! JSON metadata record.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{CommonArgs, ConfigError};

#[derive(Debug, Parser)]
#[command(name = "hyplab", version, about = "Numerical experiments on intermittent interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive the hyperbolic-time parameters (σ, δ, k0, k1, k_b, K, B).
    Params(CommonArgs),
    /// Tabulate the dynamical partition.
    Partition(CommonArgs),
    /// Fit the scaling laws of the partition.
    Asymptotics(CommonArgs),
    /// Tails of the first hyperbolic time h and the escape time H.
    #[command(name = "h-tail", alias = "hyptime-tail")]
    HTail(CommonArgs),
    /// Tail of the first return time to the base interval.
    ReturnTail(CommonArgs),
    /// Large-deviation fractions of the counter's Birkhoff averages.
    LdTail(CommonArgs),
    /// Running density of hyperbolic times along one orbit.
    Density(CommonArgs),
    /// Birkhoff averages of ln f' against the quadrature value K.
    Lyapunov(CommonArgs),
    /// Chi-square checks that f and the square map preserve Lebesgue measure.
    Invariance(CommonArgs),
    /// Decay of correlations for v = w = x - 1/2.
    Correlation(CommonArgs),
    /// Check the cut function's defining properties.
    Validate(CommonArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<hyplab::Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
