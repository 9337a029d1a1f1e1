//! `tiltmc`: rare-event estimators for portfolio credit losses under normal
//! mixture copulas, driven by config files or named benchmark tables.

mod config;
mod output;
mod tables;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tiltmc::engine::run_experiment;

use crate::config::RunConfig;
use crate::output::{Report, ReportRow};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    Config(String),
    /// Runtime numerical failure: non-convergence, degenerate pilot,
    /// non-finite ratios (exit code 3).
    Numerical(String),
    /// I/O trouble (exit code 1).
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<tiltmc::Error> for CliError {
    fn from(e: tiltmc::Error) -> Self {
        match e {
            tiltmc::Error::InvalidParameter(_) | tiltmc::Error::UnknownPreset(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tiltmc",
    version,
    about = "Rare-event Monte Carlo for portfolio credit risk \
             (sufficient exponential tilting importance sampling)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        b1: Option<usize>,
        #[arg(long)]
        b2: Option<usize>,
        /// crude | is | both
        #[arg(long)]
        mode: Option<String>,
        /// Worker threads; changes wall time only, never values.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce one benchmark table (ids 1-10, 12) with its default seed.
    ReproduceTable {
        id: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one family's tilt and print a paired crude/IS comparison.
    TiltDemo {
        /// normal | mvn2 | gamma | mixture
        family: String,
        /// Event threshold.
        #[arg(long, default_value_t = 3.0)]
        a: f64,
        /// mvn2 event: sum | both | prod
        #[arg(long)]
        event: Option<String>,
        /// Use the reciprocal event 1/X > a (gamma family).
        #[arg(long)]
        inverse: bool,
        #[arg(long, default_value_t = 10_000)]
        b2: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Transform-vs-oracle check; alias of `reproduce-table 4`.
    FftCheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tiltmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            config,
            seed,
            b1,
            b2,
            mode,
            threads,
            out,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut parsed = RunConfig::parse(&text)?;
            if let Some(s) = seed {
                parsed.experiment.seed = Some(s);
            }
            if let Some(v) = b1 {
                parsed.experiment.b1 = Some(v);
            }
            if let Some(v) = b2 {
                parsed.experiment.b2 = Some(v);
            }
            if let Some(m) = mode {
                parsed.experiment.mode = Some(m);
            }
            if let Some(p) = out {
                parsed.output.path = Some(p);
            }
            let run = parsed.resolve()?;
            let outcome = with_threads(threads, || {
                run_experiment(&run.model, &run.shock, &run.config, run.mode)
            })
            .map_err(CliError::from)?;
            let mut report = Report::new();
            report.comment(format!("experiment {}", run.label));
            let mut converged = true;
            if let Some(crude) = &outcome.crude {
                report.push(ReportRow::from_report(
                    &run.label,
                    crude,
                    run.config_hash,
                    "",
                ));
            }
            if let Some(is) = &outcome.is {
                converged &= is.converged.unwrap_or(true);
                report.push(ReportRow::from_report(&run.label, is, run.config_hash, ""));
            }
            report
                .write(&run.out_path, run.delimiter)
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {}", run.out_path.display());
            if !converged {
                return Err(CliError::Numerical(
                    "tilt search did not converge; see the report for diagnostics".into(),
                ));
            }
            Ok(())
        }
        Command::ReproduceTable {
            id,
            seed,
            threads,
            out,
        } => {
            let report = with_threads(threads, || tables::reproduce_table(id, seed))?;
            let path = out.unwrap_or_else(|| PathBuf::from(format!("table{id}.csv")));
            report
                .write(&path, ',')
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::TiltDemo {
            family,
            a,
            event,
            inverse,
            b2,
            seed,
        } => {
            let text = tables::tilt_demo(&family, a, event.as_deref(), inverse, b2, seed)?;
            print!("{text}");
            Ok(())
        }
        Command::FftCheck { seed, out } => {
            let report = tables::reproduce_table(4, seed)?;
            let path = out.unwrap_or_else(|| PathBuf::from("table4.csv"));
            report
                .write(&path, ',')
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
