use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "schauder", version, about = "Generalized Hölder norms, nonlocal operators and heat kernel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving manifest.json, report.json and CSV files.
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Dotted-path overrides, e.g. corpus.size=8 or psi.alpha=0.4.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Norm-equivalence constants and mollification rates of ψ.
    Norms(Common),
    /// Symbol of the frozen operator on the finest grid.
    Symbol(Common),
    /// Apply the variable-coefficient operator to a corpus function.
    Apply(Common),
    /// Two-sided and derivative heat kernel bounds.
    Heatkernel(Common),
    /// Potential regularity ratios, including the high-order branch.
    Solve(Common),
    /// Sample subordinate Brownian motion and compare with the grid density.
    Simulate(Common),
    /// Schauder ratio over the corpus.
    Schauder(Common),
    /// Mapping ratio of the variable-coefficient operator.
    Mapping(Common),
    /// Perturbation bounds for localized functions.
    Perturbation(Common),
    /// All acceptance checks.
    VerifyAll(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(commands::run(cli.command))
}
