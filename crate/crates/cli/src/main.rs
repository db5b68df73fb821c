use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spatial_csma::runner::{load_scenario, run, RunError};

/// Experiments on spatial-reuse CSMA networks.
#[derive(Parser)]
#[command(name = "spatial-csma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a scenario file.
    Run {
        /// Scenario file (JSON).
        scenario: PathBuf,
        /// Output directory. Falls back to the scenario's `output.dir`,
        /// then to `$SPATIAL_CSMA_OUT`, then to `./out`.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Seed, overriding the scenario's.
        #[arg(long)]
        seed: Option<u64>,
        /// Only print errors.
        #[arg(long, short)]
        quiet: bool,
    },
}

const OUT_ENV: &str = "SPATIAL_CSMA_OUT";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            quiet,
        } => match execute(&scenario, out, seed, quiet) {
            Ok(code) => ExitCode::from(code as u8),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}

fn execute(
    path: &PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    quiet: bool,
) -> Result<i32, RunError> {
    let scenario = load_scenario(path)?;
    let dir = out
        .or_else(|| scenario.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run(&scenario, seed)?;
    let files = report.write_to(&dir)?;
    if !quiet {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        print!("{}", report.summary_json());
        eprintln!(
            "{} finished in {:.1} ms, wrote {} files to {}",
            report.experiment.name(),
            report.wall_clock_ms,
            files.len(),
            dir.display()
        );
    }
    Ok(report.exit_code)
}
