use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use imlab::{config::Scenario, exit, report, ExperimentConfig};

#[derive(Parser)]
#[command(name = "imlab", version, about = "Inertial-manifold laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's scenario (comma-separated for several).
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize the artifacts of an output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return code(if e.use_stderr() { exit::CONFIG } else { exit::PASS });
        }
    };
    match cli.command {
        Command::Run { config, scenario, out, seed } => {
            let mut cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return code(exit::CONFIG);
                }
            };
            if let Some(list) = scenario {
                let parsed: Option<Vec<Scenario>> = list.split(',').map(|s| Scenario::parse(s.trim())).collect();
                match parsed {
                    Some(v) if !v.is_empty() => cfg.scenario = imlab::config::OneOrMany::Many(v),
                    _ => {
                        eprintln!("configuration error: unknown scenario in '{list}'");
                        return code(exit::CONFIG);
                    }
                }
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            code(imlab::run(&cfg))
        }
        Command::Report { input } => {
            let collected = match report::collect(&input) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return code(exit::CONFIG);
                }
            };
            let text = report::render(&collected);
            print!("{text}");
            if input.is_dir() {
                if let Err(e) = std::fs::write(input.join("report.md"), &text) {
                    eprintln!("could not write report.md: {e}");
                }
            }
            code(if report::all_passed(&collected) { exit::PASS } else { exit::CHECK_FAILED })
        }
    }
}
