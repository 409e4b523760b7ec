use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modalray_cli::config::{RunConfig, RING_FRONTS};
use modalray_cli::run::{run_fronts, run_modes, run_trace, run_verify};
use modalray_cli::CliError;
use modalray_core::fan::Execution;

#[derive(Debug, Parser)]
#[command(name = "modalray", version, about = "Single-mode ray propagation in a shallow-water waveguide")]
struct Cli {
    /// JSON run configuration; the bundled sloped-channel ring setup when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving tables, figures and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Replace one config entry, e.g. `medium.alpha=[0,1]` or `run.tau_end=10`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for ray fans.
    #[arg(long, global = true, env = "MODALRAY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trapped-mode table at the origin.
    Modes,
    /// Per-checkpoint ray samples.
    Trace,
    /// Front polylines as CSV and SVG.
    Fronts,
    /// Run the invariant suites on the configured setup.
    Verify,
    /// Print the resolved configuration in canonical form.
    Config,
}

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load_with(path, &cli.overrides)?,
        None => RunConfig::parse_with(RING_FRONTS, &cli.overrides)?,
    };
    configure_threads(cli.threads);
    let dir = &cli.output_dir;
    let report = match cli.command {
        Command::Modes => run_modes(&config, dir)?,
        Command::Trace => run_trace(&config, dir, Execution::Parallel)?,
        Command::Fronts => run_fronts(&config, dir, Execution::Parallel)?,
        Command::Verify => match run_verify(&config, dir, Execution::Parallel) {
            Ok(report) => report,
            Err(e) => {
                eprintln!("see {}", dir.join("verify.csv").display());
                return Err(e);
            }
        },
        Command::Config => {
            print!("{}", config.canonical());
            return Ok(());
        }
    };
    for f in &report.files {
        println!("{}", report.dir.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
