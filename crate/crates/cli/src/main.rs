use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "madelung", version, about = "Run Madelung-fluid and stochastic-mechanics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Parse and check a config file without running it.
    Validate { config: PathBuf },
    /// Print the available experiment names.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => match madelung_cli::run(&config) {
            Ok(report) => {
                for c in &report.checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                println!(
                    "{} {} -> {}",
                    report.experiment.name(),
                    if report.passed { "passed" } else { "FAILED" },
                    report.output_dir.display()
                );
                report.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Validate { config } => match madelung_cli::validate(&config) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.experiment.name());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::ListExperiments => {
            for (name, description) in madelung_cli::list_experiments() {
                println!("{name:<28} {description}");
            }
            0
        }
    };
    ExitCode::from(code as u8)
}
