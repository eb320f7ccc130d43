//! `roughkit`: sample and lift paths, measure rough-path distances, solve
//! driven equations and run the convergence studies.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand};
use roughkit::{Error, Result};

use commands::{CounterexampleArgs, GoodSeqArgs, LemmasArgs, LiftArgs, MetricArgs, SampleArgs, SolveArgs, WongZakaiArgs};
use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "roughkit", version, about = "Rough-path lifts, metrics, solvers and convergence studies")]
struct Cli {
    /// Run file of `key = value` lines; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for replica loops
    #[arg(long, global = true, env = "ROUGHKIT_THREADS")]
    threads: Option<usize>,
    /// Log more (repeatable)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a Brownian or fractional Brownian path on a dyadic grid
    Sample(SampleArgs),
    /// Signature lift of a piecewise-linear path
    Lift(LiftArgs),
    /// Distance between two lifted paths on the same grid
    Metric(MetricArgs),
    /// Good-sequence rate study
    GoodSeq(GoodSeqArgs),
    /// Defects of the two approximations of the pure-area path
    Counterexample(CounterexampleArgs),
    /// Wong–Zakai study for dy = a y dt + σ y ∘ dx
    WongZakai(WongZakaiArgs),
    /// Covariance double-sum and monotonicity checks
    Lemmas(LemmasArgs),
    /// Solve a linear scalar equation along a driver CSV
    Solve(SolveArgs),
}

impl Command {
    fn keys(&self) -> Vec<&'static str> {
        let mut keys = match self {
            Command::Sample(_) => SampleArgs::KEYS.to_vec(),
            Command::Lift(_) => LiftArgs::KEYS.to_vec(),
            Command::Metric(_) => MetricArgs::KEYS.to_vec(),
            Command::GoodSeq(_) => GoodSeqArgs::keys(),
            Command::Counterexample(_) => CounterexampleArgs::KEYS.to_vec(),
            Command::WongZakai(_) => WongZakaiArgs::keys(),
            Command::Lemmas(_) => LemmasArgs::KEYS.to_vec(),
            Command::Solve(_) => SolveArgs::KEYS.to_vec(),
        };
        keys.push("threads");
        keys
    }

    fn run(self, file: &FileConfig) -> Result<()> {
        match self {
            Command::Sample(a) => a.run(file),
            Command::Lift(a) => a.run(file),
            Command::Metric(a) => a.run(file),
            Command::GoodSeq(a) => a.run(file),
            Command::Counterexample(a) => a.run(file),
            Command::WongZakai(a) => a.run(file),
            Command::Lemmas(a) => a.run(file),
            Command::Solve(a) => a.run(file),
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) => 2,
        Error::Study(_) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let filter = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter)).init();
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    file.check_keys(&cli.command.keys())?;
    if let Some(n) = file.pick("threads", cli.threads)? {
        if n == 0 {
            return Err(Error::Usage("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    }
    cli.command.run(&file)
}

fn fail(code: u8, msg: &str) -> ExitCode {
    let line: Vec<&str> = msg.split_whitespace().collect();
    eprintln!("ERROR {code}: {}", line.join(" "));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("bad arguments");
            return fail(1, first.trim_start_matches("error: "));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(exit_code(&e), &e.to_string()),
    }
}
