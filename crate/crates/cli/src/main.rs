//! `ssm`: generate kinetic data, fit rate constants, sweep noise and
//! rebuild the full set of reference reports.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use ssm_core::experiments::{fit_dataset, run_segment, SegmentSpec, STABILITY_PERCENTS};
use ssm_core::reports::{self, render_reports};
use ssm_core::reproduce::{reproduce, write_reproduction, SUMMARY_HEADER};
use ssm_core::{
    generate_dataset, run_stability_sweep, AssemblyOptions, Dataset, ExperimentConfig, FitResult, RateConstants,
    SolveMode, SolverConfig, SsmError,
};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_CHECKS_FAILED: u8 = 5;

const OUT_DIR_ENV: &str = "SSM_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "ssm-out";

#[derive(Parser)]
#[command(
    name = "ssm",
    version,
    about = "Rate constants of A -> B -> C by spline spectral collocation"
)]
struct Cli {
    /// JSON run file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write closed-form concentrations at the given times as CSV.
    Generate(GenerateArgs),
    /// Fit rate constants to a data file or a built-in segment.
    Fit(FitArgs),
    /// Fit a segment under a list of signed noise levels.
    Sweep(SweepArgs),
    /// Run every reference fit, grid and sweep and grade the results.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct Rounding {
    /// Decimal places of generated data [default: 4].
    #[arg(long = "round", value_name = "DIGITS", conflicts_with = "full_precision")]
    round: Option<u32>,

    /// Keep generated data at full precision.
    #[arg(long)]
    full_precision: bool,
}

impl Rounding {
    fn resolve(&self, cfg: &RunConfig) -> Option<u32> {
        if self.full_precision {
            None
        } else if let Some(d) = self.round {
            Some(d)
        } else {
            cfg.rounding.unwrap_or(Some(4))
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    /// Comma-separated sample times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[command(flatten)]
    rounding: Rounding,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in segment: ss1-3pt, ss1 or ss2.
    #[arg(long)]
    segment: Option<String>,
    /// Custom comma-separated sample times for generated data.
    #[arg(long, value_delimiter = ',', conflicts_with = "segment")]
    times: Option<Vec<f64>>,
    /// Polynomial degree per species.
    #[arg(long)]
    degree: Option<usize>,
    /// square or least-squares.
    #[arg(long)]
    mode: Option<SolveMode>,
    /// Rate constants used to generate data and grade the fit.
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[command(flatten)]
    rounding: Rounding,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with header t,Ca,Cb,Cc.
    #[arg(long, conflicts_with_all = ["segment", "times"])]
    data: Option<PathBuf>,
    /// Known rate constants `k1,k2` to report percent errors against.
    #[arg(long, value_delimiter = ',', value_name = "K1,K2")]
    truth: Option<Vec<f64>>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated signed noise levels in percent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    noise: Option<Vec<f64>>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Core(SsmError),
    Exit(u8),
}

impl From<SsmError> for Failure {
    fn from(e: SsmError) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &SsmError) -> u8 {
    match e {
        SsmError::Io { .. } => EXIT_IO,
        SsmError::SingularNormalEquations { .. } | SsmError::NonFiniteState { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Generate(args) => generate(&args, &cfg),
        Command::Fit(args) => fit(&args, &cfg),
        Command::Sweep(args) => sweep(&args, &cfg),
        Command::Reproduce(args) => run_reproduce(&args, &cfg),
    }
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn rates(k1: Option<f64>, k2: Option<f64>, cfg: &RunConfig) -> Result<RateConstants, SsmError> {
    let reference = RateConstants::REFERENCE;
    RateConstants::new(
        k1.or(cfg.k1).unwrap_or(reference.k1),
        k2.or(cfg.k2).unwrap_or(reference.k2),
    )
}

fn jobs(flag: Option<usize>, cfg: &RunConfig) -> usize {
    flag.or(cfg.jobs).unwrap_or(1).max(1)
}

fn create_dir(dir: &Path) -> Result<(), SsmError> {
    std::fs::create_dir_all(dir).map_err(|e| SsmError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn generate(args: &GenerateArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let k = rates(args.k1, args.k2, cfg)?;
    let times = args
        .times
        .clone()
        .or_else(|| cfg.times.clone())
        .ok_or_else(|| SsmError::InvalidInput("--times is required".into()))?;
    let data = generate_dataset(&k, &times, args.rounding.resolve(cfg))?;
    match &args.out {
        Some(path) => data.save(path)?,
        None => {
            let stdout = std::io::stdout();
            data.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

/// Segment, degree, mode and solver settings after merging flags and file.
struct Model {
    segment: SegmentSpec,
    degree: usize,
    mode: SolveMode,
    truth: RateConstants,
    rounding: Option<u32>,
    solver: SolverConfig,
}

fn resolve_model(args: &ModelArgs, cfg: &RunConfig) -> Result<Model, SsmError> {
    let segment = match (&args.segment, &args.times) {
        (Some(name), _) => name.parse()?,
        (None, Some(times)) => SegmentSpec::Custom {
            name: "custom".into(),
            times: times.clone(),
        },
        (None, None) => match (&cfg.segment, &cfg.times) {
            (Some(name), _) => name.parse()?,
            (None, Some(times)) => SegmentSpec::Custom {
                name: "custom".into(),
                times: times.clone(),
            },
            (None, None) => return Err(SsmError::InvalidInput("give --data, --segment or --times".into())),
        },
    };
    let mut solver = cfg.solver.clone().unwrap_or_default();
    if let Some(n) = args.max_iterations {
        solver.max_iterations = n;
    }
    solver.validate()?;
    Ok(Model {
        degree: args.degree.or(cfg.degree).unwrap_or_else(|| segment.default_degree()),
        mode: args.mode.or(cfg.mode).unwrap_or_else(|| segment.default_mode()),
        truth: rates(args.k1, args.k2, cfg)?,
        rounding: args.rounding.resolve(cfg),
        segment,
        solver,
    })
}

impl Model {
    fn experiment(&self) -> ExperimentConfig {
        let mut e = ExperimentConfig::for_segment(self.segment.clone());
        e.degree = self.degree;
        e.mode = self.mode;
        e.truth = self.truth;
        e.rounding = self.rounding;
        e.solver = self.solver.clone();
        e
    }
}

fn print_fit(fit: &FitResult, truth: Option<&RateConstants>) {
    println!("k1 = {}", fit.rates[0]);
    println!("k2 = {}", fit.rates[1]);
    if let Some(truth) = truth {
        let (e1, e2) = fit.rate_constants().percent_error(truth);
        println!("k1 error = {e1:.4}%");
        println!("k2 error = {e2:.4}%");
    }
    println!(
        "{} after {} iterations ({}), residual {:e}",
        if fit.converged { "converged" } else { "NOT converged" },
        fit.iterations,
        fit.termination.as_str(),
        fit.final_residual_norm
    );
}

fn fit(args: &FitArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let truth = match args.truth.as_deref() {
        Some(&[k1, k2]) => Some(RateConstants::new(k1, k2)?),
        Some(_) => return Err(SsmError::InvalidInput("--truth takes exactly two values".into()).into()),
        None => None,
    };
    let dir = out_dir(&args.model.out_dir, cfg);

    let fit = if let Some(path) = &args.data {
        let data = Dataset::load(path)?;
        let degree = args.model.degree.or(cfg.degree).unwrap_or(5);
        let mode = args.model.mode.or(cfg.mode).unwrap_or(SolveMode::LeastSquares);
        let mut solver = cfg.solver.clone().unwrap_or_default();
        if let Some(n) = args.model.max_iterations {
            solver.max_iterations = n;
        }
        let fit = fit_dataset(&data, degree, &AssemblyOptions::new(mode), &solver)?;
        create_dir(&dir)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
        let report = dir.join(format!("fit_{stem}.csv"));
        reports::write_fit(&report, &fit, truth.as_ref())?;
        log::info!("wrote {}", report.display());
        print_fit(&fit, truth.as_ref());
        fit
    } else {
        let mut model = resolve_model(&args.model, cfg)?;
        if let Some(t) = truth {
            model.truth = t;
        }
        let results = run_segment(&model.experiment(), None, 1)?;
        for path in render_reports(&dir, &results, &model.truth)? {
            log::info!("wrote {}", path.display());
        }
        print_fit(&results.experiment.fit, Some(&model.truth));
        results.experiment.fit
    };
    if fit.converged {
        Ok(())
    } else {
        Err(Failure::Exit(EXIT_NOT_CONVERGED))
    }
}

fn sweep(args: &SweepArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let model = resolve_model(&args.model, cfg)?;
    let percents = args
        .noise
        .clone()
        .or_else(|| cfg.noise.clone())
        .unwrap_or_else(|| STABILITY_PERCENTS.to_vec());
    let rows = run_stability_sweep(&model.experiment(), &percents, jobs(args.jobs, cfg))?;
    let dir = out_dir(&args.model.out_dir, cfg);
    create_dir(&dir)?;
    let path = dir.join(format!("stability_{}.csv", model.segment.name()));
    reports::write_stability(&path, &rows)?;
    log::info!("wrote {}", path.display());

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", reports::STABILITY_HEADER);
    for r in &rows {
        let _ = writeln!(out, "{}", reports::stability_line(r));
    }
    if rows.iter().all(|r| r.converged) {
        Ok(())
    } else {
        Err(Failure::Exit(EXIT_NOT_CONVERGED))
    }
}

fn run_reproduce(args: &ReproduceArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let rep = reproduce(jobs(args.jobs, cfg))?;
    let dir = out_dir(&args.out_dir, cfg);
    for path in write_reproduction(&dir, &rep)? {
        log::info!("wrote {}", path.display());
    }
    println!("{SUMMARY_HEADER}");
    for c in &rep.checks {
        println!("{}", c.line());
    }
    let failed = rep.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        println!("all {} checks passed", rep.checks.len());
        Ok(())
    } else {
        eprintln!("{failed} of {} checks failed", rep.checks.len());
        Err(Failure::Exit(EXIT_CHECKS_FAILED))
    }
}
