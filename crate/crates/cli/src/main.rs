//! `paracontact`: verify paracontact metric structures and run the
//! flat-structure obstruction experiment.
//!
//! Exit codes: 0 when no check fails, 1 when at least one check fails,
//! 2 on input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use paracontact_core::commands::{self, InputError, RunOptions};
use paracontact_core::document::ReportDocument;
use paracontact_core::paracontact::CheckConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Parser, Debug)]
#[command(name = "paracontact", version, about = "Symbolic verification workbench for paracontact metric structures")]
struct Cli {
    /// Seed of the probe-point sampler used by numeric zero tests.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Absolute tolerance of numeric zero tests.
    #[arg(long, global = true, default_value = "1e-9")]
    tol: f64,
    /// Number of probe points per numeric zero test.
    #[arg(long, global = true, default_value_t = 8)]
    probes: usize,
    /// Report format: human-readable text or the versioned JSON document.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall times in the report (they are null otherwise).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List catalog entries whose name contains FILTER.
    List {
        #[arg(default_value = "")]
        filter: String,
    },
    /// Run every check on a catalog entry or a structure file.
    Verify {
        /// Catalog name or path to a structure file.
        source: String,
    },
    /// Check the pullback of the flat example to the standard contact form.
    PullbackCheck {
        /// Replace a map component, e.g. `--override x1='z*cosh(x)'`.
        #[arg(long = "override", value_name = "COORD=EXPR")]
        overrides: Vec<String>,
    },
    /// Minimize the structure residual in dimensions 3 and 5.
    Search {
        /// Comma-separated dimensions (3 and/or 5).
        #[arg(long, default_value = "3,5")]
        dims: String,
        /// Inclusive range `a..b` or comma-separated list.
        #[arg(long, default_value = "0..4")]
        seeds: String,
        /// Objective evaluations per (dimension, seed) cell.
        #[arg(long, default_value_t = 200_000)]
        budget: usize,
    },
}

fn run(cli: &Cli) -> Result<ReportDocument, InputError> {
    let opts = RunOptions { check: CheckConfig { seed: cli.seed, tol: cli.tol, probes: cli.probes }, timings: cli.timings };
    match &cli.command {
        Command::List { filter } => Ok(commands::cmd_list(filter)),
        Command::Verify { source } => commands::cmd_verify(source, &opts),
        Command::PullbackCheck { overrides } => {
            let pairs = overrides
                .iter()
                .map(|o| {
                    o.split_once('=')
                        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                        .ok_or_else(|| InputError(format!("--override: expected COORD=EXPR, got `{o}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            commands::cmd_pullback_check(&pairs, &opts)
        }
        Command::Search { dims, seeds, budget } => {
            let dims = commands::parse_dims(dims)?;
            let seeds = commands::parse_seeds(seeds)?;
            commands::cmd_search(&dims, &seeds, *budget, cli.timings)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.probes == 0 || cli.tol.is_nan() || cli.tol <= 0.0 {
        eprintln!("error: --probes must be positive and --tol must be a positive number");
        return ExitCode::from(2);
    }
    let doc = match run(&cli) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let text = match cli.format {
        Format::Text => doc.to_text(),
        Format::Machine => doc.to_machine(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(doc.exit_code())
}
