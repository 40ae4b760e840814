mod analyze;
mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collox::drivers::Method;

use crate::analyze::{AnalyzeArgs, Kind};
use crate::config::{Axis, Layer, ProblemKind, Real, RealText};
use crate::error::CliResult;

/// B-spline collocation solver for second-order initial value problems.
#[derive(Debug, Parser)]
#[command(name = "collox", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one configuration; writes solution.csv, phase.csv and report.json.
    Solve(RunArgs),
    /// Solve every combination of the listed parameters; writes sweep.csv.
    Sweep(RunArgs),
    /// Fit models to sweep results (CSV or JSON).
    Analyze(AnalyzeCmd),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON file with any of the flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name, optionally with overrides: `table3.2:mu=0.05,l=20|40`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    /// Spline order.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Number of mesh intervals.
    #[arg(long, value_delimiter = ',')]
    l: Vec<usize>,
    /// Intervals per segment or stage (must divide l).
    #[arg(long, value_delimiter = ',')]
    w: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long, value_delimiter = ',')]
    iter_max: Vec<usize>,
    /// Solution range `A B`.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    range: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    samples_per_interval: Option<usize>,
    /// Always run iter_max iterations per stage.
    #[arg(long)]
    fixed_iterations: bool,
    /// Right-end magnitude treated as divergence; `inf` disables the check.
    #[arg(long)]
    divergence_bound: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dg0: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalyzeCmd {
    /// Sweep results: a CSV file, or JSON (one report or an array of them).
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Whole-range iteration count; estimated from the data when omitted.
    #[arg(long)]
    n_ori: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_min: Option<f64>,
    /// Cost column for the mu-cost fit.
    #[arg(long, value_enum, default_value = "wall")]
    cost: analyze::Cost,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn axis<T>(v: Vec<T>) -> Option<Axis<T>> {
    match v.len() {
        0 => None,
        1 => v.into_iter().next().map(Axis::One),
        _ => Some(Axis::Many(v)),
    }
}

fn layers(args: RunArgs) -> CliResult<Layer> {
    let mut merged = Layer::default();
    let file = args.config.as_deref().map(Layer::from_file).transpose()?;
    let preset = args
        .preset
        .clone()
        .or_else(|| file.as_ref().and_then(|f| f.preset.clone()));
    if let Some(spec) = preset {
        merged = config::parse_preset(&spec)?;
    }
    if let Some(file) = file {
        merged = merged.overlay(file);
    }
    let flags = Layer {
        preset: None,
        problem: args.problem,
        mu: axis(args.mu),
        g0: args.g0,
        dg0: args.dg0,
        k: axis(args.k),
        l: axis(args.l),
        w: axis(args.w),
        method: axis(args.method),
        iter_max: axis(args.iter_max),
        range: args.range.map(|r| [r[0], r[1]]),
        tol: args.tol,
        samples_per_interval: args.samples_per_interval,
        fixed_iterations: args.fixed_iterations.then_some(true),
        divergence_bound: args.divergence_bound.map(|b| {
            if b == f64::INFINITY {
                Real::Text(RealText::Inf)
            } else {
                Real::Number(b)
            }
        }),
        out: args.out,
        jobs: args.jobs,
        seed: None,
    };
    Ok(merged.overlay(flags))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve(args) => {
            let plan = config::plan(layers(args)?)?;
            run::solve_one(plan)
        }
        Command::Sweep(args) => {
            let mut plan = config::plan(layers(args)?)?;
            if plan.seed.is_none() {
                plan.seed = std::env::var("COLLOX_SEED").ok().and_then(|s| s.parse().ok());
            }
            run::sweep(plan)
        }
        Command::Analyze(cmd) => analyze::run(AnalyzeArgs {
            input: cmd.input,
            kind: cmd.kind,
            n_ori: cmd.n_ori,
            lambda: cmd.lambda,
            n_min: cmd.n_min,
            cost: cmd.cost,
            out: cmd.out,
        }),
        Command::Presets => {
            for (name, about) in config::PRESETS {
                println!("{name:<10} {about}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("collox: {e}");
            e.exit_code()
        }
    }
}
