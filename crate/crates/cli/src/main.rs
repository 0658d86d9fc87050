mod config;
mod modes;
mod output;

use std::path::PathBuf;
use std::process;

use clap::error::ErrorKind;
use clap::Parser;

/// Boolean-model laboratory: simulation, closed-form densities,
/// estimation, and shape reconstruction for anisotropic grain unions.
#[derive(Parser, Debug)]
#[command(name = "btl", version, about)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    mode: config::Mode,

    /// JSON experiment description.
    #[arg(long)]
    spec: PathBuf,

    /// Override the base seed from the spec file.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the replicate count from the spec file.
    #[arg(long)]
    reps: Option<usize>,

    /// Override the output path from the spec file.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker thread count (also honours BTL_THREADS; default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };

    let text = match std::fs::read_to_string(&cli.spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.spec.display());
            return 1;
        }
    };
    let spec: config::ExperimentSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: invalid spec {}: {e}", cli.spec.display());
            return 1;
        }
    };

    let overrides = config::Overrides {
        seed: cli.seed,
        reps: cli.reps,
        out: cli.out,
        threads: cli.threads,
    };
    let resolved = match config::resolve(cli.mode, spec, &overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    let threads = resolved.spec.threads.or_else(|| {
        std::env::var("BTL_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            // A failure here only means a pool already exists (tests);
            // the run still proceeds with that pool.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }

    match modes::run(&resolved) {
        Ok(outcome) => {
            if modes::failure_budget_exceeded(outcome.total_reps, outcome.failed_reps) {
                eprintln!(
                    "error: {} of {} replicates failed (budget is 1%)",
                    outcome.failed_reps, outcome.total_reps
                );
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
