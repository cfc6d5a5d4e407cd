//! Command-line interface: seeded runs, comparisons and the VI benchmark.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use bde_core::baselines::SchemeId;

use crate::bench::bench_vi;
use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::report::{run_csv, summary_csv, RunReport};
use crate::runner;

#[derive(Debug, Parser)]
#[command(
    name = "bde",
    about = "Bandwidth demand estimation for RAN slices: simulated closed-loop experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scheme on a scenario and write the per-slot CSV.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        #[arg(long, value_enum)]
        scheme: CliScheme,
        /// Master seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run several schemes over several seeds and write a summary CSV.
    Compare {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Schemes to run.
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        schemes: Vec<CliScheme>,
        /// Seeds, comma separated; defaults to the scenario's seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Output directory for the CSVs.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Time value iteration on a random model with |X2| = |X3| = |W| = n.
    BenchVi {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        reps: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliScheme {
    /// Model-based controller: bandit warmup, then plan every episode.
    Rl,
    /// Per-user-bucket bandit forever, never plans.
    Vucb1,
    /// One bandit, blind to the slice state.
    Noadapt,
    /// On-policy first-visit Monte Carlo control.
    Mc,
}

impl CliScheme {
    fn to_scheme(self) -> SchemeId {
        match self {
            CliScheme::Rl => SchemeId::ProposedRl,
            CliScheme::Vucb1 => SchemeId::VUcb1Only,
            CliScheme::Noadapt => SchemeId::NoAdaptation,
            CliScheme::Mc => SchemeId::McControl,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| HarnessError::Write {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn run_csv_path(out: &Path, report: &RunReport) -> PathBuf {
    out.join(format!(
        "{}_seed{}.csv",
        report.scheme.as_str(),
        report.seed
    ))
}

fn print_report_summary(report: &RunReport) {
    let a = &report.aggregates;
    println!(
        "{} seed={}: slots={} cumulative_cost={:.1} avg_bandwidth={:.2} PRB qos_success={:.2}%",
        report.scheme.as_str(),
        report.seed,
        a.slots,
        a.cumulative_cost,
        a.avg_bandwidth_prb,
        100.0 * a.qos_success_rate
    );
    for g in &a.per_x1 {
        println!(
            "  x1={}: slots={} avg_bandwidth={:.2} qos_success={:.2}% cumulative_cost={:.1}",
            g.x1,
            g.slots,
            g.avg_bandwidth_prb,
            100.0 * g.qos_success_rate,
            g.cumulative_cost
        );
    }
    println!("note: {}", report.capacity_note);
}

/// Execute a parsed command line. Split from `main` so tests can drive it.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            scheme,
            seed,
            out,
        } => {
            let config = ScenarioConfig::from_path(&scenario)?;
            let seed = seed.unwrap_or(config.seed);
            let report = runner::run(&config, scheme.to_scheme(), seed)?;
            let path = run_csv_path(&out, &report);
            write_file(&path, &run_csv(&report))?;
            print_report_summary(&report);
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Compare {
            scenario,
            schemes,
            seeds,
            out,
        } => {
            let config = ScenarioConfig::from_path(&scenario)?;
            let seeds = if seeds.is_empty() {
                vec![config.seed]
            } else {
                seeds
            };
            let schemes: Vec<SchemeId> = schemes.iter().map(|s| s.to_scheme()).collect();
            let (reports, stats) = runner::compare(&config, &schemes, &seeds)?;
            for report in &reports {
                write_file(&run_csv_path(&out, report), &run_csv(report))?;
                print_report_summary(report);
            }
            let summary_path = out.join("summary.csv");
            write_file(&summary_path, &summary_csv(&stats))?;
            println!("wrote {}", summary_path.display());
            Ok(())
        }
        Command::BenchVi { n, reps, seed } => {
            let result = bench_vi(n, reps, seed)?;
            println!(
                "value iteration on {}^3 = {} state-action pairs: mean {:.6} s over {} runs ({} sweeps)",
                result.n,
                result.n * result.n * result.n,
                result.mean_seconds,
                result.repetitions,
                result.iterations
            );
            Ok(())
        }
    }
}

/// Parse arguments and execute; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}
