//! Command-line runner: configuration ingestion, scenario presets and
//! output management for the signed-particle simulator.

mod config;
mod execute;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::execute::{EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(
    name = "sigmc",
    about = "Signed-particle Monte Carlo simulator for phase-space quantum dynamics",
    after_help = "Exit codes: 0 success, 2 configuration error, 3 particle-cap abort, 4 numeric error."
)]
struct Args {
    /// Scenario preset: free_packet | gaussian_barrier | abrupt_barrier |
    /// hydrogen_1d | kernel_report | classical_limit | custom
    #[arg(long)]
    preset: Option<String>,

    /// Configuration file (key = value lines, '#' comments)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one key, e.g. --set grid.nx=512 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (same as --set output.dir=DIR)
    #[arg(long)]
    out: Option<String>,

    /// Master random seed (same as --set run.seed=N)
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads, 0 = all cores (same as --set run.workers=N)
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: &Args) -> i32 {
    let mut sets = Vec::new();
    for item in &args.set {
        let Some((key, value)) = item.split_once('=') else {
            eprintln!("error: --set expects KEY=VALUE, got {item:?}");
            return EXIT_CONFIG;
        };
        sets.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    if let Some(seed) = args.seed {
        sets.push(("run.seed".to_owned(), seed.to_string()));
    }
    if let Some(workers) = args.workers {
        sets.push(("run.workers".to_owned(), workers.to_string()));
    }
    if let Some(out) = &args.out {
        sets.push(("output.dir".to_owned(), out.clone()));
    }

    let config = match config::resolve(args.preset.as_deref(), args.config.as_deref(), &sets) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };

    let execute_in_pool = || match execute::execute(&config) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    };

    if config.workers > 0 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
        {
            Ok(pool) => pool.install(execute_in_pool),
            Err(e) => {
                eprintln!("configuration error: run.workers: {e}");
                EXIT_CONFIG
            }
        }
    } else {
        execute_in_pool()
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = run(&args);
    if code == EXIT_OK {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(code as u8)
    }
}
