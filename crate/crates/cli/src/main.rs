//! `pgq`: Baird counterexample experiments and gradient certification.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pgq_core::harness::{grad_check, Algorithm, ExperimentConfig, Mode};
use pgq_core::{run_experiment, Error};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "pgq", version, about = "Policy-gradient Q-learning on the Baird star")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// i.i.d. transitions with states drawn uniformly.
    BairdSampled(RunArgs),
    /// Simulated trajectories from a uniform start state.
    BairdTrajectory(RunArgs),
    /// Compare the analytic MSPBE gradient with central differences.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau_target: Option<f64>,
    /// Temperature of the action-selection policy; defaults to --tau-target
    /// in sampled mode.
    #[arg(long)]
    tau_behavior: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    measure_every: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    /// Random theta draws per problem.
    #[arg(long, default_value_t = 20)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional CSV with one row per (problem, draw, h).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    fn into_config(self, mode: Mode) -> ExperimentConfig {
        let defaults = ExperimentConfig::defaults(mode, self.algo);
        let tau_target = self.tau_target.unwrap_or(defaults.tau_target);
        let tau_behavior = match (self.tau_behavior, mode) {
            (Some(tau), _) => tau,
            (None, Mode::Sampled) => tau_target,
            (None, Mode::Trajectory) => defaults.tau_behavior,
        };
        ExperimentConfig {
            mode,
            algorithm: self.algo,
            alpha: self.alpha.unwrap_or(defaults.alpha),
            beta: self.beta.unwrap_or(defaults.beta),
            tau_target,
            tau_behavior,
            steps: self.steps.unwrap_or(defaults.steps),
            runs: self.runs.unwrap_or(defaults.runs),
            seed: self.seed,
            measure_every: self.measure_every.unwrap_or(defaults.measure_every),
            output_path: Some(self.out),
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

fn run_baird(args: RunArgs, mode: Mode) -> Result<(), Failure> {
    let config = args.into_config(mode);
    config
        .validate()
        .map_err(|e| Failure::Config(e.into()))?;
    let series = run_experiment(&config).map_err(|e| match e {
        Error::Config(_) | Error::InvalidArgument(_) => Failure::Config(e.into()),
        other => Failure::Numerical(other.into()),
    })?;
    let path = config.output_path.as_deref().expect("set from --out");
    series
        .write_csv(path)
        .map_err(|e| Failure::Config(anyhow::Error::new(e).context("writing metrics")))?;

    if let Some((initial, last)) = series.mean_initial_and_final_mspbe() {
        eprintln!(
            "{} {mode}: {} runs, mean MSPBE {initial:.6e} -> {last:.6e}, wrote {}",
            config.algorithm,
            config.runs,
            path.display()
        );
    }
    if series.all_runs_diverged() {
        return Err(Failure::Numerical(anyhow::anyhow!("every run diverged")));
    }
    Ok(())
}

fn run_grad_check(args: GradCheckArgs) -> Result<(), Failure> {
    if args.draws == 0 {
        return Err(Failure::Config(anyhow::anyhow!("--draws must be at least 1")));
    }
    let report = grad_check(args.draws, args.seed).map_err(|e| Failure::Numerical(e.into()))?;
    println!("{report}");
    if let Some(path) = &args.out {
        std::fs::write(path, report.to_csv_string())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Config)?;
    }
    if !report.passed() {
        return Err(Failure::Numerical(anyhow::anyhow!(
            "gradient check exceeded tolerance {:e}",
            report.tolerance
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::BairdSampled(args) => run_baird(args, Mode::Sampled),
        Command::BairdTrajectory(args) => run_baird(args, Mode::Trajectory),
        Command::GradCheck(args) => run_grad_check(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
