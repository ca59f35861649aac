use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isac::harness::{plot_script, read_csv, render_summary, run_experiment, selftest, summarize, ExperimentSpec, RowStatus};
use isac::Error;

#[derive(Parser)]
#[command(name = "isac", version, about = "IRS-assisted sensing and communication beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write the result CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a result CSV per scheme, receiver, target and SINR point.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn init_logging() {
    let level = std::env::var("ISAC_LOG").unwrap_or_else(|_| "warn".into());
    env_logger::Builder::new().parse_filters(&level).format_timestamp(None).init();
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) => EXIT_CONFIG,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_NUMERICAL,
    })
}

fn run(config: PathBuf, trials: Option<usize>, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let mut spec = match ExperimentSpec::from_path(&config) {
        Ok(s) => s,
        Err(e) => return exit_for(&e),
    };
    spec.trials = trials.unwrap_or(spec.trials);
    spec.master_seed = seed.unwrap_or(spec.master_seed);
    spec.jobs = jobs;
    spec.output = out.or(spec.output).or_else(|| Some(PathBuf::from("results.csv")));
    let rows = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    let solved = rows.iter().filter(|r| r.status.has_solution()).count();
    eprintln!("{} rows, {solved} with a solution", rows.len());
    if rows.iter().any(|r| r.status == RowStatus::Numerical) {
        eprintln!("some runs hit numerical failures");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    if solved == 0 {
        eprintln!("every run was infeasible");
        return ExitCode::from(EXIT_INFEASIBLE);
    }
    ExitCode::SUCCESS
}

fn summarize_cmd(input: PathBuf, plot: Option<PathBuf>) -> ExitCode {
    let summary = match read_csv(&input).and_then(|rows| summarize(&rows)) {
        Ok(s) => s,
        Err(e) => return exit_for(&e),
    };
    print!("{}", render_summary(&summary));
    if let Some(path) = plot {
        if let Err(e) = std::fs::write(&path, plot_script(&summary)) {
            return exit_for(&Error::Io(e));
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    init_logging();
    match Cli::parse().command {
        Command::Run { config, trials, seed, jobs, out } => run(config, trials, seed, jobs, out),
        Command::Summarize { input, plot } => summarize_cmd(input, plot),
        Command::Selftest => {
            let results = selftest();
            for (name, ok) in &results {
                println!("{} {name}", if *ok { "ok  " } else { "FAIL" });
            }
            if results.iter().all(|(_, ok)| *ok) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}
