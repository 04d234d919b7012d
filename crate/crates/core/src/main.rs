use std::path::PathBuf;

use clap::Parser;
use histkit::cli::{run, Command};

/// Consistent-histories toolkit.
#[derive(Parser)]
#[command(name = "histkit", version)]
struct Args {
    command: Command,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario's epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let args = Args::parse();
    if let Some(n) = std::env::var("HISTKIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(run(args.command, &args.scenario, &args.out, args.epsilon, args.seed));
}
