use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use horocoho::harness::{run, Experiment, ScanConfig};

/// Run one experiment and print its checks.
#[derive(Debug, Parser)]
#[command(name = "horocoho", version)]
struct Cli {
    /// verify, scan-upper, scan-tame, scan-lower, scan-map, cocycle or convergence
    experiment: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel scans.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> horocoho::Result<bool> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut config = ScanConfig::from_file(experiment, &cli.config)?;
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| horocoho::Error::InvalidParameter(format!("--threads {n}: {e}")))?;
    }
    let outcome = run(&config)?;
    for check in &outcome.checks {
        println!("{check}");
    }
    println!("{}", outcome.summary());
    Ok(outcome.passed())
}
