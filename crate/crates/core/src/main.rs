use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polya_market::engine::run;
use polya_market::io::{emit_trace, parse_scenario, parse_seeds, sweep, Format, CONCENTRATION_THRESHOLD};
use polya_market::oracle::{validate_all, ENUMERATION_CAP};

#[derive(Parser)]
#[command(name = "polya-market", version, about = "Interacting Pólya-urn market share simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replica and write trace.csv, trace.json and heatmap.svg.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Histogram bins (default from the scenario, else 15).
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Run one replica per seed and print an aggregate JSON report.
    Sweep {
        scenario: PathBuf,
        /// `a..b`, `a..=b` or a comma-separated list.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        bins: Option<usize>,
        /// Herfindahl level counted as concentrated.
        #[arg(long, default_value_t = CONCENTRATION_THRESHOLD)]
        threshold: f64,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the exact oracles and print a JSON pass/fail report.
    Validate {
        /// Largest enumerated state space.
        #[arg(long, default_value_t = ENUMERATION_CAP)]
        cap: usize,
        /// Include the long-run moment check (about 2 million updates).
        #[arg(long)]
        moments: bool,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> polya_market::Result<bool> {
    match cli.command {
        Command::Run { scenario, seed, out, bins } => {
            let mut config = parse_scenario(&fs::read_to_string(&scenario)?)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(bins) = bins {
                config.bins = bins;
            }
            let trace = run(&config)?;
            for path in emit_trace(&trace, &config, &out, &Format::ALL)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Sweep { scenario, seeds, bins, threshold, out } => {
            let mut config = parse_scenario(&fs::read_to_string(&scenario)?)?;
            if let Some(bins) = bins {
                config.bins = bins;
            }
            let report = sweep(&config, &parse_seeds(&seeds)?, threshold)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(path) = out {
                fs::write(path, format!("{text}\n"))?;
            }
            println!("{text}");
            Ok(true)
        }
        Command::Validate { cap, moments } => {
            let report = validate_all(cap, moments);
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(report.passed)
        }
    }
}
