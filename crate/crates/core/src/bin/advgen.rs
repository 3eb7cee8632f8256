//! `advgen` command line: run experiments, benchmark selection algorithms,
//! replay and validate traces.
//!
//! Exit codes: 0 success, 1 config or input error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use advgen::env::ParamRanges;
use advgen::experiment::{
    bench_csv, bench_pls, replay, run_experiment, validate_trace_file, ExperimentConfig, ExperimentError,
    DEFAULT_BENCH_BUDGETS,
};
use advgen::pls::GaussianStudy;

#[derive(Parser)]
#[command(name = "advgen", version, about = "Search for network traces that make a protocol underperform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full search, selection and reevaluation pipeline.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Executor runs allowed in flight at once.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Benchmark the selection algorithms on synthetic Gaussian arms.
    BenchPls {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BENCH_BUDGETS)]
        budgets: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 20.0)]
        sigma: f64,
        #[arg(long, default_value_t = 50)]
        arms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a saved trace and print per-run measurements.
    Replay {
        trace: PathBuf,
        /// Experiment config supplying executor, scoring and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write events.csv with every packet event of the target run.
        #[arg(long)]
        events: bool,
        /// Directory for events.csv; defaults to the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a trace file parses and lies within the parameter bounds.
    Validate {
        trace: PathBuf,
        /// Take the bounds from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_config() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out, jobs } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(j) = jobs {
                cfg.max_concurrent = j;
            }
            let r = run_experiment(&cfg)?;
            println!("best observed score: {}", r.best_observed_score);
            println!(
                "winner: iteration {} observed {} reevaluated {} +/- {} over {} rounds",
                r.winner.iteration, r.winner.observed_score, r.reevaluated.mean, r.reevaluated.std_dev, r.reevaluated.rounds
            );
            println!(
                "executor runs: optimizer {} selection {} final {}",
                r.executor_runs.optimizer, r.executor_runs.selection, r.executor_runs.final_
            );
            println!("outputs in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::BenchPls { budgets, trials, sigma, arms, seed, out } => {
            let study = GaussianStudy { arms, trials, sigma, seed };
            let rows = bench_pls(&budgets, &study).map_err(|e| Failure::Input(e.to_string()))?;
            let csv = bench_csv(&rows);
            match out {
                Some(p) => std::fs::write(&p, csv).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Replay { trace, config, events, out } => {
            let cfg = load_config(config.as_ref())?;
            let dir = events.then(|| out.unwrap_or_else(|| cfg.output_dir.clone()));
            let r = replay(&trace, &cfg, dir.as_deref())?;
            println!("run,throughput_mbps,mean_delay_ms,completion_time_ms,bytes_delivered");
            for (run, p) in &r.runs {
                let fct = p.completion_time_ms.map(|v| v.to_string()).unwrap_or_default();
                println!("{run},{},{},{fct},{}", p.throughput_mbps, p.mean_delay_ms, p.bytes_delivered);
            }
            println!("reevaluated score: {} +/- {} over {} rounds", r.reevaluated.mean, r.reevaluated.std_dev, r.reevaluated.rounds);
            if let Some(p) = r.events_file {
                println!("events written to {}", p.display());
            }
            Ok(())
        }
        Command::Validate { trace, config } => {
            let ranges = match config {
                Some(p) => ExperimentConfig::load(&p)?.bounds,
                None => ParamRanges::default(),
            };
            let t = validate_trace_file(&trace, &ranges)?;
            println!("ok: {} intervals, {} ms", t.intervals.len(), t.total_duration_ms());
            Ok(())
        }
    }
}
