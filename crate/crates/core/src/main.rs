use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use paracheck::par::{with_threads, Execution};
use paracheck::runner;
use paracheck::scenario::Overrides;

#[derive(Parser)]
#[command(name = "paracheck", version, about = "Numerical verification of identities on submanifolds of paracontact manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or `builtin:NAME`.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of sample points (random sampling) or a cap on explicit ones.
        #[arg(long)]
        points: Option<usize>,
        /// Replace every tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the check catalog.
    ListChecks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListChecks => {
            print!("{}", runner::list_checks());
            ExitCode::SUCCESS
        }
        Command::Run { scenario, seed, points, tol, format, out, threads } => {
            let prepared = match runner::load(&scenario, &Overrides { seed, points, tol }) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let (exec, threads) = match threads {
                Some(1) => (Execution::Sequential, 1),
                Some(n) => (Execution::Parallel, n),
                None => (Execution::Parallel, 0),
            };
            let report = if threads > 1 { with_threads(threads, || runner::run(&prepared, exec)) } else { runner::run(&prepared, exec) };
            let report = match report {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let text = match format {
                Format::Json => report.to_json(),
                Format::Text => report.to_text(),
            };
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
