use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asyncmatd::harness::{self, ExperimentConfig};
use asyncmatd::Error;

#[derive(Parser)]
#[command(name = "asyncmatd", version, about = "Asynchronous multi-agent TD(0) experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed point, omega, sigma, values and mixing time of the instance.
    GroundTruth(Common),
    /// Replicated runs of every grid cell, with per-run and aggregate CSVs.
    Run(Common),
    /// Tail balls across the grid: 1/N slope and delay ordering.
    Sweep(Common),
    /// The property battery; exits 1 if any property fails.
    Verify(Common),
    /// Line chart and tidy CSV from aggregate CSVs.
    PlotData {
        #[command(flatten)]
        common: Common,
        /// Aggregate CSVs; defaults to `*_aggregate.csv` in `--out`.
        inputs: Vec<PathBuf>,
    },
}

enum Failure {
    Verification,
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        config.grid.seed = seed;
    }
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn aggregates_in(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with("_aggregate.csv"))
        .collect();
    found.sort();
    Ok(found)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::GroundTruth(c) => {
            let config = load(&c)?;
            print_json(&harness::cmd_ground_truth(&config, c.out.as_deref())?)?;
        }
        Command::Run(c) => {
            let config = load(&c)?;
            let cells = harness::cmd_run(&config, c.out.as_deref())?;
            let tail = config.analysis.tail_fraction;
            for cell in &cells {
                let ball = cell.ball(tail).map(|b| format!("{:.6e} +- {:.2e}", b.mean, b.standard_error));
                println!(
                    "{}: final mean delta^2 {:.6e}, tail ball {}",
                    cell.cell.label(),
                    cell.mean.last().copied().unwrap_or(f64::NAN),
                    ball.unwrap_or_else(|e| e.to_string())
                );
            }
        }
        Command::Sweep(c) => {
            let config = load(&c)?;
            print_json(&harness::cmd_sweep(&config, c.out.as_deref())?)?;
        }
        Command::Verify(c) => {
            let config = load(&c)?;
            let report = harness::cmd_verify(&config, c.out.as_deref())?;
            for v in &report.properties {
                println!("{} {}", if v.passed { "PASS" } else { "FAIL" }, v.name);
            }
            if !report.passed {
                return Err(Failure::Verification);
            }
        }
        Command::PlotData { common, inputs } => {
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let inputs = if inputs.is_empty() && out.is_dir() {
                aggregates_in(&out)?
            } else {
                inputs
            };
            print_json(&harness::cmd_plot_data(&inputs, &out)?)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Csv(_) | Error::MissingInput(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::GroundTruth(c) | Command::Run(c) | Command::Sweep(c) | Command::Verify(c) => c.threads,
        Command::PlotData { common, .. } => common.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
