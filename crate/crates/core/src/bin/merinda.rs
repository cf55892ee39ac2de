//! Command-line front end.
//!
//! Exit codes: 0 success, 1 quality gate failed, 2 usage or config error.
//! Settings resolve as command-line flag, then config file, then built-in
//! default. `MERINDA_THREADS` caps the worker pool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use merinda::cost::write_sweep_csv;
use merinda::dynamics::{add_noise, catalog_system, NoiseSpec};
use merinda::harness::{
    catalog_run_config, cost_constants, cost_scan, default_epsilon, run, run_benchmark,
    threads_from_env, DataSpec, ExperimentReport, HarnessError, KeyValueConfig, Method,
    MethodConfig, RunConfig, ScanSource,
};
use merinda::merinda::{Aggregation, Checkpoint};

#[derive(Parser)]
#[command(
    name = "merinda",
    version,
    about = "Sparse model recovery from time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a catalog system and write its trajectory CSV.
    Simulate(SimulateArgs),
    /// Recover a sparse model with SINDy or MERINDA and report the errors.
    Recover(Box<RecoverArgs>),
    /// Run the accuracy benchmark suite.
    Benchmark(BenchmarkArgs),
    /// Evaluate the memory and energy models over a schedule or the catalog.
    CostScan(CostScanArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Catalog system (aid, lotka, lorenz, pathogenic, f8).
    system: String,
    /// Number of samples; defaults to the system's.
    #[arg(long)]
    steps: Option<usize>,
    /// Sampling and integration step; defaults to the system's.
    #[arg(long)]
    dt: Option<f64>,
    /// Standard deviation of Gaussian noise added to the states.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sindy,
    Merinda,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Mean,
    Median,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["data", "system"])))]
struct RecoverArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Trajectory CSV (columns t, x0.., u0..).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Catalog system simulated at its defaults.
    #[arg(long)]
    system: Option<String>,
    /// Library order for --data (config key `order`, default 2).
    #[arg(long)]
    order: Option<usize>,
    /// Flat `key = value` file; keys are the long flag names with `_`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gaussian noise added to catalog data; seeded by the run seed.
    #[arg(long)]
    noise: Option<f64>,
    /// Number of seeds to run, starting at --seed (default 1).
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reconstruction-MSE threshold; catalog systems may have a default.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report JSON (one object, or an array for several seeds).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Coefficient CSV of the first seed.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// Model checkpoint JSON of the first seed (MERINDA).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Loss history CSV of the first seed (MERINDA).
    #[arg(long)]
    loss_history: Option<PathBuf>,

    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    ridge_lambda: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,

    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    window_length: Option<usize>,
    #[arg(long)]
    window_stride: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    final_learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    prune_epoch: Option<usize>,
    #[arg(long)]
    target_sparsity: Option<usize>,
    #[arg(long)]
    prune_stages: Option<usize>,
    #[arg(long)]
    solver_step: Option<f64>,
    #[arg(long)]
    consistency_weight: Option<f64>,
    #[arg(long, value_enum)]
    aggregation: Option<AggregationArg>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, default_value = "table3")]
    suite: String,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Output directory for summary.csv and runs/*.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("points").required(true).args(["schedule", "catalog"])))]
struct CostScanArgs {
    /// Cost constants as `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `N,M` pairs, one per line.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Evaluate the catalog systems.
    #[arg(long)]
    catalog: bool,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Gate(String),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let system = catalog_system(&args.system).map_err(|e| usage(e.to_string()))?;
    let steps = args.steps.unwrap_or(system.default_samples);
    let dt = args.dt.unwrap_or(system.default_dt);
    if steps < 2 || !(dt.is_finite() && dt > 0.0) {
        return Err(usage("--steps must be at least 2 and --dt positive"));
    }
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(usage("--noise must be a non-negative number"));
    }
    let clean = system
        .simulate(dt, steps)
        .map_err(|e| Failure::Runtime(e.into()))?;
    let noise = if args.noise > 0.0 {
        NoiseSpec::gaussian(args.noise, args.seed)
    } else {
        NoiseSpec::none()
    };
    let traj = add_noise(&clean, &noise);
    write_output(args.out.as_deref(), &traj.to_csv_string())?;
    Ok(())
}

// Resolves one setting: flag, then config file, then the existing default.
fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    config: &KeyValueConfig,
    key: &str,
    target: &mut T,
) -> Result<(), Failure> {
    if let Some(v) = flag {
        *target = v;
    } else if let Some(v) = config.get_parsed::<T>(key)? {
        *target = v;
    }
    Ok(())
}

fn resolve_opt<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    config: &KeyValueConfig,
    key: &str,
    target: &mut Option<T>,
) -> Result<(), Failure> {
    if let Some(v) = flag {
        *target = Some(v);
    } else if let Some(v) = config.get_parsed::<T>(key)? {
        *target = Some(v);
    }
    Ok(())
}

const RECOVER_KEYS: [&str; 21] = [
    "order",
    "noise",
    "epsilon",
    "threshold",
    "ridge_lambda",
    "max_sweeps",
    "epochs",
    "batch_size",
    "window_length",
    "window_stride",
    "hidden_size",
    "learning_rate",
    "final_learning_rate",
    "clip_norm",
    "prune_epoch",
    "target_sparsity",
    "prune_stages",
    "solver_step",
    "consistency_weight",
    "aggregation",
    "seeds",
];

fn recover_config(args: &RecoverArgs, config: &KeyValueConfig) -> Result<RunConfig, Failure> {
    config.ensure_known(&RECOVER_KEYS)?;
    let method = match args.method {
        MethodArg::Sindy => Method::Sindy,
        MethodArg::Merinda => Method::Merinda,
    };
    let mut run_config = match (&args.system, &args.data) {
        (Some(system), None) => catalog_run_config(system, method)?,
        (None, Some(path)) => {
            let mut order = 2usize;
            resolve(args.order, config, "order", &mut order)?;
            if order == 0 {
                return Err(usage("--order must be at least 1"));
            }
            RunConfig {
                data: DataSpec::Csv {
                    path: path.clone(),
                    library_order: order,
                },
                method: merinda::harness::runner::default_method_config(method, None),
                epsilon: None,
            }
        }
        _ => return Err(usage("give exactly one of --data or --system")),
    };

    let mut noise = 0.0;
    resolve(args.noise, config, "noise", &mut noise)?;
    if noise != 0.0 {
        if !(noise.is_finite() && noise > 0.0) {
            return Err(usage("--noise must be a non-negative number"));
        }
        match &mut run_config.data {
            DataSpec::Catalog { noise: spec, .. } => *spec = NoiseSpec::gaussian(noise, 0),
            DataSpec::Csv { .. } => return Err(usage("--noise applies to --system data only")),
        }
    }
    resolve_opt(args.epsilon, config, "epsilon", &mut run_config.epsilon)?;

    match &mut run_config.method {
        MethodConfig::Sindy(c) => {
            resolve(args.threshold, config, "threshold", &mut c.threshold)?;
            resolve(
                args.ridge_lambda,
                config,
                "ridge_lambda",
                &mut c.ridge_lambda,
            )?;
            resolve(args.max_sweeps, config, "max_sweeps", &mut c.max_sweeps)?;
            c.validate().map_err(HarnessError::from)?;
        }
        MethodConfig::Merinda(c) => {
            resolve(args.epochs, config, "epochs", &mut c.epochs)?;
            resolve(args.batch_size, config, "batch_size", &mut c.batch_size)?;
            resolve(
                args.window_length,
                config,
                "window_length",
                &mut c.window_length,
            )?;
            resolve(
                args.window_stride,
                config,
                "window_stride",
                &mut c.window_stride,
            )?;
            resolve(args.hidden_size, config, "hidden_size", &mut c.hidden_size)?;
            resolve(
                args.learning_rate,
                config,
                "learning_rate",
                &mut c.learning_rate,
            )?;
            resolve_opt(
                args.final_learning_rate,
                config,
                "final_learning_rate",
                &mut c.final_learning_rate,
            )?;
            resolve(args.clip_norm, config, "clip_norm", &mut c.clip_norm)?;
            resolve_opt(args.prune_epoch, config, "prune_epoch", &mut c.prune_epoch)?;
            resolve_opt(
                args.target_sparsity,
                config,
                "target_sparsity",
                &mut c.target_sparsity,
            )?;
            resolve(
                args.prune_stages,
                config,
                "prune_stages",
                &mut c.prune_stages,
            )?;
            resolve_opt(args.solver_step, config, "solver_step", &mut c.solver_step)?;
            resolve(
                args.consistency_weight,
                config,
                "consistency_weight",
                &mut c.consistency_weight,
            )?;
            let aggregation = match args.aggregation {
                Some(AggregationArg::Mean) => Some(Aggregation::Mean),
                Some(AggregationArg::Median) => Some(Aggregation::Median),
                None => match config.get("aggregation") {
                    None => None,
                    Some("mean") => Some(Aggregation::Mean),
                    Some("median") => Some(Aggregation::Median),
                    Some(other) => {
                        return Err(usage(format!(
                            "aggregation must be mean or median, got '{other}'"
                        )))
                    }
                },
            };
            if let Some(a) = aggregation {
                c.aggregation = a;
            }
            c.validate().map_err(HarnessError::from)?;
        }
    }
    if let DataSpec::Catalog { system, .. } = &run_config.data {
        if args.epsilon.is_none() && config.get("epsilon").is_none() {
            run_config.epsilon = default_epsilon(system);
        }
    }
    Ok(run_config)
}

fn recover(args: &RecoverArgs) -> Result<(), Failure> {
    let config = match &args.config {
        Some(p) => KeyValueConfig::load(p)?,
        None => KeyValueConfig::default(),
    };
    let run_config = recover_config(args, &config)?;
    let mut seeds = 1u64;
    resolve(args.seeds, &config, "seeds", &mut seeds)?;
    if seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if matches!(run_config.method, MethodConfig::Sindy(_))
        && (args.checkpoint.is_some() || args.loss_history.is_some())
    {
        return Err(usage(
            "--checkpoint and --loss-history need --method merinda",
        ));
    }

    let mut reports: Vec<ExperimentReport> = Vec::new();
    for seed in args.seed..args.seed + seeds {
        let outcome = run(&run_config, seed)?;
        let r = &outcome.report;
        eprintln!(
            "{} {} seed {}: reconstruction_mse {:.6e} coefficient_mse {} support {}/{} ({:.1}s)",
            r.system,
            r.method.name(),
            seed,
            r.reconstruction_mse,
            r.coefficient_mse
                .map_or("n/a".to_string(), |v| format!("{v:.6e}")),
            r.support_size,
            outcome.coefficients.n_states() * outcome.coefficients.n_terms(),
            r.wall_time
        );
        if reports.is_empty() {
            if let Some(p) = &args.coefficients {
                write_output(Some(p), &outcome.coefficients.to_csv_string())?;
            }
            if let Some(training) = &outcome.training {
                if let Some(p) = &args.checkpoint {
                    let mut buf = Vec::new();
                    Checkpoint::from_result(training)
                        .write_json(&mut buf)
                        .map_err(HarnessError::from)?;
                    buf.push(b'\n');
                    write_output(Some(p), &String::from_utf8(buf).expect("json is utf-8"))?;
                }
                if let Some(p) = &args.loss_history {
                    let mut text = String::from("epoch,loss\n");
                    for (i, l) in training.loss_history.iter().enumerate() {
                        text.push_str(&format!("{i},{l:e}\n"));
                    }
                    write_output(Some(p), &text)?;
                }
            }
        }
        reports.push(outcome.report);
    }

    let mean = reports.iter().map(|r| r.reconstruction_mse).sum::<f64>() / reports.len() as f64;
    let diverged = reports.iter().any(|r| r.reconstruction_diverged);
    let pass = !diverged && run_config.epsilon.is_none_or(|eps| mean <= eps);
    if let Some(p) = &args.report {
        let json = if reports.len() == 1 {
            serde_json::to_string_pretty(&reports[0])
        } else {
            serde_json::to_string_pretty(&reports)
        }
        .context("serializing report")?;
        write_output(Some(p), &(json + "\n"))?;
    }
    eprintln!(
        "mean reconstruction_mse over {} seed(s): {:.6e}{}",
        reports.len(),
        mean,
        run_config
            .epsilon
            .map_or(String::new(), |eps| format!(" (epsilon {eps})"))
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Gate(match (diverged, run_config.epsilon) {
            (true, _) => "recovery failed: a reconstruction diverged".to_string(),
            (false, Some(eps)) => {
                format!("recovery failed: mean reconstruction MSE {mean:.6e} exceeds epsilon {eps}")
            }
            (false, None) => unreachable!("passes without epsilon unless diverged"),
        }))
    }
}

fn benchmark(args: &BenchmarkArgs) -> Result<(), Failure> {
    let result = run_benchmark(&args.suite, args.seeds)?;
    result.write(&args.out)?;
    print!("{}", result.summary_csv());
    Ok(())
}

fn cost_scan_cmd(args: &CostScanArgs) -> Result<(), Failure> {
    let config = args
        .config
        .as_deref()
        .map(KeyValueConfig::load)
        .transpose()?;
    let constants = cost_constants(config.as_ref())?;
    let source = match (&args.schedule, args.catalog) {
        (Some(path), false) => ScanSource::Schedule(
            std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read schedule {}: {e}", path.display())))?,
        ),
        (None, true) => ScanSource::Catalog,
        _ => return Err(usage("give exactly one of --schedule or --catalog")),
    };
    let points = cost_scan(&source, &constants)?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &points).map_err(HarnessError::from)?;
    write_output(
        args.out.as_deref(),
        &String::from_utf8(buf).expect("csv is utf-8"),
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = threads_from_env()
        .map_err(Failure::from)
        .and_then(|threads| {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("building worker pool")?;
            }
            match &cli.command {
                Command::Simulate(a) => simulate(a),
                Command::Recover(a) => recover(a),
                Command::Benchmark(a) => benchmark(a),
                Command::CostScan(a) => cost_scan_cmd(a),
            }
        });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Gate(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
