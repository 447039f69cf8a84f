use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ringpair::config;
use ringpair::io;
use ringpair::run::{self, FitReport, RunOptions};
use ringpair_core::analysis::visibility_pair;
use ringpair_core::diag::Severity;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Simulate a microring time-bin entangled photon-pair source.
#[derive(Parser)]
#[command(name = "ringpair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or bundled scenario and write its artifacts.
    Run {
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with status 3 if any scenario threshold is missed.
        #[arg(long)]
        check: bool,
        /// Override a scenario value, e.g. `--set ring.backscatter_r=0`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write raw time tags of CAR scenarios.
        #[arg(long)]
        export_tags: bool,
    },
    /// Report every problem in a scenario file.
    Validate { scenario: String },
    /// List bundled scenarios.
    ListScenarios,
    /// Fit a sweep CSV and print the fit report as JSON.
    Fit { sweep: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            check,
            overrides,
            export_tags,
        } => run(&scenario, &out, check, &overrides, export_tags),
        Command::Validate { scenario } => validate(&scenario),
        Command::ListScenarios => {
            for (name, _) in config::BUNDLED {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Fit { sweep } => fit(&sweep),
    }
}

fn run(scenario: &str, out: &std::path::Path, check: bool, overrides: &[String], export_tags: bool) -> ExitCode {
    let (s, warnings) = match config::load_scenario(scenario, overrides) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for w in &warnings {
        eprintln!("{w}");
    }
    let summary = match run::run_scenario(&s, out, &RunOptions { export_tags }) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    for c in &summary.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", out.join("summary.json").display());
    if check && !summary.all_checks_pass() {
        return ExitCode::from(EXIT_CHECK);
    }
    ExitCode::SUCCESS
}

fn validate(scenario: &str) -> ExitCode {
    match config::validate_config(scenario) {
        Ok(diags) => {
            for d in &diags {
                println!("{d}");
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn fit(path: &std::path::Path) -> ExitCode {
    let sweep = match std::fs::File::open(path).map_err(io::FormatError::from).and_then(io::read_sweep) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match visibility_pair(&sweep) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&FitReport::new(&v)).expect("fit report serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("analysis stage failed: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
