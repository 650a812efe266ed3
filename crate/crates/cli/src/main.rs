//! `srknots`: simulate super-resolution observations, compute knots and LARS
//! paths, run the exact tests and reproduce the Monte-Carlo figures.
//!
//! Every command prints one JSON object on stdout. Exit status is 0 on
//! success, 2 on a usage error and 1 when the computation fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex;
use serde_json::{json, Value};
use srknots::knots::{certify, KnotOptions};
use srknots::lars::{lars_run, LarsOptions};
use srknots::mc_harness::{
    empirical_level, ks_uniform, reproduce_figure, run_experiment, AlternativeSpec, ExperimentConfig, FigureId,
    SigmaMode, SpikeWeight,
};
use srknots::numerics::RngStream;
use srknots::sr_model::{load_observation, save_observation, synthesize};
use srknots::stat_tests::{TestName, TestRunner};
use srknots::{Atom, AtomicMeasure, Observation};

const LEVEL: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(
    name = "srknots",
    version,
    about = "Exact tests on the mean of the super-resolution process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw an observation and write it as JSON.
    Simulate(SimulateArgs),
    /// First and second knots with the Hessian remainder.
    Knots(ObsArgs),
    /// p-value of one statistic on an observation.
    Test(TestArgs),
    /// Continuous LARS path.
    Lars(LarsArgs),
    /// Null distribution of a statistic: KS distance and level.
    Calibrate(ExperimentArgs),
    /// Power of a statistic against random-location spikes.
    Power(PowerArgs),
    /// Reproduce a figure as CSV and SVG panels.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    fc: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    /// WEIGHT:LOCATION[:PHASE], repeatable.
    #[arg(long = "spike", value_parser = parse_spike)]
    spikes: Vec<Atom>,
    /// Do not record the noise level in the file.
    #[arg(long)]
    hide_sigma: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ObsArgs {
    #[arg(long)]
    obs: PathBuf,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    stat: StatArg,
    #[arg(long)]
    obs: PathBuf,
    /// Known noise level; overrides the one stored in the observation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Grid size for `grid-st`.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed of the lattice randomization of `grid` and `t-grid`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct LarsArgs {
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 4)]
    kmax: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda_min: f64,
    /// Also write the path as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    fc: usize,
    #[arg(long)]
    stat: StatArg,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Also write the per-replication values as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Spike weight: `logN`, `sqrtN` or a number; give it once or twice.
    #[arg(long = "weight", value_parser = parse_weight, required = true)]
    weights: Vec<SpikeWeight>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// fig3, fig4, fig5 or fig6.
    #[arg(value_parser = parse_figure)]
    figure: FigureId,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Output root; panels go to `<out>/<figure>/`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum StatArg {
    Rice,
    TRice,
    St,
    Grid,
    TGrid,
    GridSt,
}

enum Failure {
    Usage(String),
    Compute(srknots::Error),
}

impl From<srknots::Error> for Failure {
    fn from(e: srknots::Error) -> Self {
        match e {
            srknots::Error::InvalidArgument(msg) => Failure::Usage(msg),
            other => Failure::Compute(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn parse_spike(s: &str) -> Result<Atom, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err("expected WEIGHT:LOCATION[:PHASE]".into());
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    let weight = num(parts[0])?;
    let location = num(parts[1])?;
    let phase = parts.get(2).map(|p| num(p)).transpose()?.unwrap_or(0.0);
    if !(weight.is_finite() && location.is_finite() && phase.is_finite()) {
        return Err("spike fields must be finite".into());
    }
    Ok(Atom {
        location,
        weight: Complex::from_polar(weight, phase),
    })
}

fn parse_weight(s: &str) -> Result<SpikeWeight, String> {
    match s {
        "logN" => Ok(SpikeWeight::LogN),
        "sqrtN" => Ok(SpikeWeight::SqrtN),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|w| *w > 0.0 && w.is_finite())
            .map(SpikeWeight::Fixed)
            .ok_or_else(|| format!("expected logN, sqrtN or a positive number, got {other:?}")),
    }
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse().map_err(|e: srknots::Error| e.to_string())
}

fn check_positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        usage(format!("--{name} must be positive, got {v}"))
    }
}

fn test_name(stat: StatArg, grid: Option<usize>, known: bool) -> CliResult<TestName> {
    if grid.is_some() && stat != StatArg::GridSt {
        return usage("--grid only applies to --stat grid-st");
    }
    Ok(match (stat, known) {
        (StatArg::Rice, true) => TestName::Rice,
        (StatArg::Rice | StatArg::TRice, _) => TestName::TRice,
        (StatArg::Grid, true) => TestName::Grid,
        (StatArg::Grid | StatArg::TGrid, _) => TestName::TGrid,
        (StatArg::St, true) => TestName::Spacing,
        (StatArg::GridSt, true) => match grid {
            Some(p) if p >= 2 => TestName::GridSpacing(p),
            Some(p) => return usage(format!("--grid must be at least 2, got {p}")),
            None => return usage("--stat grid-st needs --grid"),
        },
        (StatArg::St | StatArg::GridSt, false) => {
            return usage("the spacing tests need a known noise level (--sigma)");
        }
    })
}

fn needs_randomization(name: TestName) -> bool {
    matches!(name, TestName::Grid | TestName::TGrid)
}

fn emit(value: &Value) {
    println!("{}", srknots::json::to_string(value));
}

fn simulate(a: SimulateArgs) -> CliResult<Value> {
    let sigma = if a.sigma == 0.0 {
        0.0
    } else {
        check_positive("sigma", a.sigma)?
    };
    let measure = AtomicMeasure::new(a.spikes)?;
    let obs = synthesize(&measure, a.fc, sigma, RngStream::new(a.seed, 0))?;
    let obs = if a.hide_sigma { obs.with_sigma(None)? } else { obs };
    match a.out {
        Some(path) => {
            save_observation(&obs, &path)?;
            Ok(json!({ "out": path }))
        }
        None => Ok(serde_json::from_str(&obs.to_json()).map_err(srknots::Error::from)?),
    }
}

fn knots(a: ObsArgs) -> CliResult<Value> {
    let obs = load_observation(&a.obs)?;
    let cert = certify(&obs, &KnotOptions::default())?;
    Ok(serde_json::to_value(cert).map_err(srknots::Error::from)?)
}

fn known_sigma(flag: Option<f64>, obs: &Observation) -> CliResult<Option<f64>> {
    flag.map(|s| check_positive("sigma", s))
        .transpose()
        .map(|s| s.or(obs.sigma()))
}

fn test(a: TestArgs) -> CliResult<Value> {
    let obs = load_observation(&a.obs)?;
    let sigma = known_sigma(a.sigma, &obs)?;
    let name = test_name(a.stat, a.grid, sigma.is_some())?;
    let stream = match (needs_randomization(name), a.seed) {
        (true, Some(seed)) => RngStream::new(seed, 0),
        (true, None) => return usage(format!("--stat {name} is randomized and needs --seed")),
        (false, _) => RngStream::new(0, 0),
    };
    let report = TestRunner::new(&obs, sigma, stream).run(name)?;
    Ok(serde_json::to_value(report).map_err(srknots::Error::from)?)
}

fn lars(a: LarsArgs) -> CliResult<Value> {
    let obs = load_observation(&a.obs)?;
    let Some(sigma) = known_sigma(a.sigma, &obs)? else {
        return usage("the LARS kernel needs a noise level (--sigma)");
    };
    let opts = LarsOptions {
        k_max: a.kmax,
        lambda_min: a.lambda_min,
        ..LarsOptions::default()
    };
    let path = lars_run(&obs, sigma, &opts)?;
    if let Some(out) = &a.out {
        path.save_csv(out)?;
    }
    Ok(serde_json::to_value(&path).map_err(srknots::Error::from)?)
}

fn experiment_config(a: &ExperimentArgs, alternative: AlternativeSpec) -> CliResult<ExperimentConfig> {
    let studentized = matches!(a.stat, StatArg::TRice | StatArg::TGrid);
    let mode = if studentized {
        SigmaMode::Unknown
    } else {
        SigmaMode::Known(check_positive("sigma", a.sigma)?)
    };
    let name = test_name(a.stat, a.grid, !studentized)?;
    let cfg = ExperimentConfig::new(a.fc, mode, vec![name], alternative)
        .with_reps(a.reps)
        .with_seed(a.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(cfg: &ExperimentConfig, out: Option<&PathBuf>) -> CliResult<Value> {
    let table = run_experiment(cfg)?;
    if let Some(path) = out {
        srknots::mc_harness::emit_csv(&[&table], path)?;
    }
    let name = cfg.statistics[0];
    let values = table.column(name).unwrap_or_default();
    let (ks, level) = if values.is_empty() {
        (None, None)
    } else {
        (Some(ks_uniform(&values)?), Some(empirical_level(&values, LEVEL)?))
    };
    Ok(json!({
        "statistic": name,
        "fc": cfg.fc,
        "alt_id": cfg.alternative.id(),
        "reps": cfg.reps,
        "failures": table.failures.len(),
        "ks": ks,
        "level_0_05": level,
    }))
}

fn calibrate(a: ExperimentArgs) -> CliResult<Value> {
    let cfg = experiment_config(&a, AlternativeSpec::null())?;
    summarize(&cfg, a.out.as_ref())
}

fn power(a: PowerArgs) -> CliResult<Value> {
    let fc = a.experiment.fc.max(1);
    let alternative = match a.weights.as_slice() {
        [w] => AlternativeSpec::one(*w),
        [w1, w2] => AlternativeSpec::two(*w1, *w2, fc),
        _ => return usage("--weight must be given once or twice"),
    };
    let cfg = experiment_config(&a.experiment, alternative)?;
    summarize(&cfg, a.experiment.out.as_ref())
}

fn reproduce(a: ReproduceArgs) -> CliResult<Value> {
    if a.reps == 0 {
        return usage("--reps must be at least 1");
    }
    let files = reproduce_figure(a.figure, a.seed, a.reps, &a.out, None)?;
    Ok(json!({ "figure": a.figure.to_string(), "files": files }))
}

fn dispatch(cli: Cli) -> CliResult<Value> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Knots(a) => knots(a),
        Command::Test(a) => test(a),
        Command::Lars(a) => lars(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Power(a) => power(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(value) => {
            emit(&value);
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
