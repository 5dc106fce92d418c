//! `debtsim` command line: feasibility checks, simulations with trace
//! output, seed sweeps and trace re-analysis.
//!
//! Exit codes: 0 success or feasible, 1 usage/config/IO error, 2 infeasible.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_seed_list, ExperimentFile, Overrides, SeedList};
use crate::error::{CliError, CliResult};

/// Default output root when neither `--out` nor `[output] dir` is given.
pub const OUT_ENV: &str = "DEBTSIM_OUT";

#[derive(Debug, Parser)]
#[command(name = "debtsim", version, about = "Debt-based real-time scheduling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the throughputs against every subset constraint of the rate region.
    Feasibility {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = debtsim::feasibility::DEFAULT_TIGHT_TOLERANCE)]
        tolerance: f64,
    },
    /// Run each (policy, seed) pair and write a trace CSV and summary JSON.
    Simulate(RunArgs),
    /// Run each (policy, seed) pair and write one aggregate JSON.
    Sweep(RunArgs),
    /// Recompute statistics from an existing trace CSV.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        t_min: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory [default: [output] dir, then $DEBTSIM_OUT, then ./out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed range `a..b` or list `1,5,9`
    #[arg(long, value_parser = parse_seed_list)]
    pub seeds: Option<SeedList>,
    #[arg(long)]
    pub frames: Option<u64>,
    /// Replaces the configured policies; repeatable
    #[arg(long = "policy")]
    pub policies: Vec<String>,
    #[arg(long)]
    pub t_min: Option<u64>,
    #[arg(long)]
    pub stride: Option<u64>,
}

impl RunArgs {
    fn experiment(&self) -> CliResult<config::Experiment> {
        let file = ExperimentFile::load(&self.config)?;
        let out = self.out.clone().or_else(|| {
            if file.output.dir.is_some() {
                None
            } else {
                std::env::var_os(OUT_ENV).map(PathBuf::from)
            }
        });
        file.resolve(&Overrides {
            out,
            seeds: self.seeds.clone().map(|s| s.0),
            frames: self.frames,
            policies: self.policies.clone(),
            t_min: self.t_min,
            stride: self.stride,
        })
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Feasibility { config, tolerance } => {
            let file = ExperimentFile::load(&config)?;
            let out = commands::feasibility(&file, tolerance)?;
            println!("{}", output::to_json(&out));
            if !out.report.feasible {
                return Err(CliError::Negative("infeasible".into()));
            }
        }
        Command::Simulate(args) => {
            let exp = args.experiment()?;
            for path in commands::simulate(&exp)? {
                println!("{}", path.display());
            }
        }
        Command::Sweep(args) => {
            let exp = args.experiment()?;
            let (report, path) = commands::sweep(&exp)?;
            for p in report.policies.iter().filter(|p| !p.failures.is_empty()) {
                for f in &p.failures {
                    eprintln!("{} seed {}: {}", p.policy, f.seed, f.error);
                }
            }
            println!("{}", path.display());
        }
        Command::Analyze { config, trace, t_min } => {
            let file = ExperimentFile::load(&config)?;
            let t_min = t_min
                .or(file.run.t_min)
                .unwrap_or(debtsim::engine::DEFAULT_T_MIN);
            let out = commands::analyze(&file, &trace, t_min)?;
            println!("{}", output::to_json(&out));
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Negative(msg)) if msg == "infeasible" => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
