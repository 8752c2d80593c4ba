use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use driftdiff::config::ExperimentConfig;
use driftdiff::experiments::{is_solver_failure, run_experiment};
use driftdiff::plot::{emit_plot_data, PlotKind};
use driftdiff::Error;

#[derive(Parser)]
#[command(name = "driftdiff", version, about = "Experiments for parabolic equations with singular drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// `key=value`, applied after the file; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Turn a trace into plot-ready CSV plus a JSON of reference curves.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        kind: String,
    },
}

const EXIT_ASSERTION: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidDomain(_)
        | Error::IncompatibleExponents(_)
        | Error::EmbeddingUndefined { .. } => EXIT_PARSE,
        _ => EXIT_SOLVER,
    }
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if is_solver_failure(e) {
        let mut inner = e;
        while let Error::StepFailed { source, .. } = inner {
            inner = source;
        }
        if let Error::NonConvergence { history, .. } = inner {
            let tail: Vec<String> = history.iter().rev().take(5).rev().map(|r| format!("{r:.3e}")).collect();
            eprintln!("  last residuals: {}", tail.join(", "));
        }
    }
    ExitCode::from(exit_code(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
            overrides,
        } => {
            let mut cfg = match ExperimentConfig::from_file(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return report_error(&e),
            };
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let manifest = match run_experiment(&cfg) {
                Ok(m) => m,
                Err(e) => return report_error(&e),
            };
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            for a in &manifest.assertions {
                println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            println!("manifest: {}", cfg.output_dir.join(driftdiff::experiments::MANIFEST_NAME).display());
            if manifest.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            }
        }
        Command::Plot { trace, kind } => {
            let kind: PlotKind = match kind.parse() {
                Ok(k) => k,
                Err(e) => return report_error(&e),
            };
            match emit_plot_data(&trace, kind) {
                Ok(p) => {
                    println!("{}", p.display());
                    ExitCode::SUCCESS
                }
                Err(e) => report_error(&e),
            }
        }
    }
}
