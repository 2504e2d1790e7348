use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mqwalk::experiment::{exit_code, run_file, RunOptions};

#[derive(Parser)]
#[command(name = "mqwalk", version, about = "Monitored quantum walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Directory that output paths are resolved against.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
        /// Cross-check the amplitude routes and closed forms; fail on any
        /// violation.
        #[arg(long)]
        verify: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out_dir,
            threads,
            verify,
        } => {
            let options = RunOptions {
                out_dir,
                threads,
                verify,
            };
            match run_file(&config, &options) {
                Ok(report) => {
                    for check in &report.checks {
                        eprintln!("check {}: worst {:e} (tol {:e}) ok", check.name, check.worst, check.tol);
                    }
                    for out in &report.outputs {
                        println!("{} {} {}", out.kind, out.path, out.sha256);
                    }
                    println!("manifest {}", report.manifest);
                    ExitCode::SUCCESS
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(exit_code(&err) as u8)
                }
            }
        }
    }
}
