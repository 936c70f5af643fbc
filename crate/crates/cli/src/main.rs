use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergolab_cli::{execute_with_threads, load, Command, ExitStatus, Overrides, RunError};

/// Interval maps with critical points: inducing schemes, transfer operators
/// and statistical limit laws.
///
/// Exit codes: 0 success, 1 validation failure, 2 check failure,
/// 3 warnings only.
#[derive(Parser)]
#[command(name = "ergolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Order checks, expansion constants and critical-orbit recurrence.
    AnalyzeMap(Args),
    /// Inducing scheme, summability and binding-level tables.
    Induce(Args),
    /// Transfer operators, densities, spectra and renewal checks.
    Spectrum(Args),
    /// CLT, functional CLT, correlation decay and large deviations.
    Limits(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `stats.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::AnalyzeMap(a) => (Command::AnalyzeMap, a),
        Cmd::Induce(a) => (Command::Induce, a),
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Limits(a) => (Command::Limits, a),
    };
    let status = match run(command, &args) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::Validation
        }
    };
    ExitCode::from(status.code() as u8)
}

fn run(command: Command, args: &Args) -> Result<ExitStatus, RunError> {
    let overrides = Overrides { out: args.out.clone(), seed: args.seed };
    let loaded = load(&args.config, &overrides)?;
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let manifest = execute_with_threads(command, &loaded, threads)?;
    for c in &manifest.checks {
        println!("{} {} ({:.6e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    for w in &manifest.warnings {
        println!("WARN {w}");
    }
    println!("{} files in {}", manifest.files.len(), loaded.config.output.dir.display());
    Ok(manifest.status())
}
