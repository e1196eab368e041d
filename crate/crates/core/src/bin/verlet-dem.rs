//! Command-line front end: single runs, K-sweeps and dual-run validation.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 simulation instability, 4 validation failure.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use verlet_dem::bench::{
    emit_report, make_scenario, run_sweep, validate_scenario, BenchError, ScenarioError, SweepMode, SweepOptions,
};
use verlet_dem::engine::{run, write_trajectory_csv, RunOptions, SimError, TimingMode};
use verlet_dem::{ConfigError, SimConfig};

#[derive(Parser)]
#[command(name = "verlet-dem", version, about = "DEM with a local Verlet-buffer broad-phase")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Walltime,
    Opcount,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation described by a JSON run file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Trajectory sampling interval in steps.
        #[arg(long, default_value_t = 100)]
        sample_every: u64,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Opcount)]
        mode: Mode,
    },
    /// Sweep K on a generated scenario and write a CSV report.
    Sweep(SweepArgs),
    /// Check that the buffered run matches the baseline exactly.
    Validate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        k: u32,
        #[arg(long, default_value_t = 5000)]
        steps: u64,
    },
    /// Print a run file for a generated scenario, ready for `run --config`.
    InitConfig {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        k: u32,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,50,100,200,500,1000,2000,5000")]
    k: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Mode::Opcount)]
    mode: Mode,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    uniform_skin_radius: bool,
    #[arg(long)]
    out: PathBuf,
}

/// The document read by `run --config`: which scenario to generate and the
/// configuration to run it with. Particles come from the scenario generator
/// seeded with `config.seed`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    scenario: String,
    n: usize,
    config: SimConfig,
}

enum Failure {
    Config(String),
    Instability(String),
    Validation(String),
    Other(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Instability(_) => 3,
            Failure::Validation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Instability(m) | Failure::Validation(m) | Failure::Other(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            SimError::Instability { .. } => Failure::Instability(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Run { source, .. } => source.into(),
            BenchError::EquivalenceViolation { .. } => Failure::Validation(e.to_string()),
            BenchError::EmptyKGrid | BenchError::NonPositiveBaseline(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn io_failure(path: &std::path::Path, e: impl std::fmt::Display) -> Failure {
    Failure::Other(format!("{}: {e}", path.display()))
}

/// `THREADS` caps internal parallelism; unset means sequential.
fn threads_from_env() -> Option<usize> {
    std::env::var("THREADS").ok()?.trim().parse().ok().filter(|&t| t > 0)
}

fn timing(mode: Mode) -> TimingMode {
    match mode {
        Mode::Walltime => TimingMode::WallTime,
        Mode::Opcount => TimingMode::OpCount,
    }
}

fn cmd_run(
    config: PathBuf,
    trajectory: Option<PathBuf>,
    sample_every: u64,
    metrics: Option<PathBuf>,
    mode: Mode,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&config).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
    let file: RunFile =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
    let scenario = make_scenario(&file.scenario, file.n, file.config.seed)?;
    let opts = RunOptions {
        timing: timing(mode),
        sample_every: trajectory.as_ref().map(|_| sample_every.max(1)),
        ..RunOptions::default()
    };
    let out = run(&file.config, scenario.particles, &opts)?;

    if let Some(path) = &trajectory {
        let f = File::create(path).map_err(|e| io_failure(path, e))?;
        write_trajectory_csv(&out.trajectory, BufWriter::new(f)).map_err(|e| io_failure(path, e))?;
    }
    let json = out.metrics.to_json();
    match &metrics {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| io_failure(path, e))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let SweepArgs {
        scenario,
        n,
        seed,
        k,
        mode,
        steps,
        uniform_skin_radius,
        out,
    } = args;
    let mut scenario = make_scenario(&scenario, n, seed)?;
    if let Some(steps) = steps {
        if steps == 0 {
            return Err(ConfigError::ZeroSteps.into());
        }
        scenario.steps = steps;
    }
    let opts = SweepOptions {
        mode: match mode {
            Mode::Walltime => SweepMode::WallTime,
            Mode::Opcount => SweepMode::OpCount,
        },
        uniform_skin_radius,
        threads: threads_from_env(),
    };
    let report = run_sweep(&scenario, &k, &opts)?;
    emit_report(&report, &out)?;
    for row in report.all_rows() {
        log::info!(
            "k={} total={} broad_executed={:.2}% mean_pairs={:.1} improvement={:.2}%",
            row.k,
            row.total,
            row.broad_executed_pct,
            row.mean_pairs,
            row.improvement_pct
        );
    }
    Ok(())
}

fn cmd_validate(scenario: String, n: usize, seed: u64, k: u32, steps: u64) -> Result<(), Failure> {
    if steps == 0 {
        return Err(ConfigError::ZeroSteps.into());
    }
    let scenario = make_scenario(&scenario, n, seed)?;
    let parallel = threads_from_env().is_some_and(|t| t > 1);
    let report = validate_scenario(&scenario, k, steps, parallel)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "{} K={k}: buffered run differs from baseline",
            report.scenario
        )))
    }
}

fn cmd_init_config(scenario: String, n: usize, seed: u64, k: u32) -> Result<(), Failure> {
    let s = make_scenario(&scenario, n, seed)?;
    let file = RunFile {
        scenario,
        n,
        config: s.config(k, true),
    };
    println!("{}", serde_json::to_string_pretty(&file).expect("run file serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            trajectory,
            sample_every,
            metrics,
            mode,
        } => cmd_run(config, trajectory, sample_every, metrics, mode),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate {
            scenario,
            n,
            seed,
            k,
            steps,
        } => cmd_validate(scenario, n, seed, k, steps),
        Command::InitConfig { scenario, n, seed, k } => cmd_init_config(scenario, n, seed, k),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
