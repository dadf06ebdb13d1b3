//! End-to-end studies: generate reference data for a segment, fit it, grade
//! the fitted curves against the closed form, and sweep fixed-sign noise.

use rayon::prelude::*;

use crate::collocation::{assemble, AssemblyOptions, ResidualTimes, Segment, SolveMode};
use crate::error::{Result, SsmError};
use crate::mechanism::{
    analytic_solution, generate_dataset, ConcentrationState, ConsecutiveFirstOrder, Dataset, RateConstants,
};
use crate::solver::{solve, FitResult, SolverConfig};

/// Grid step of the fit-error tables, in seconds.
pub const ERROR_GRID_STEP: f64 = 0.25;
/// Sampling step of the dense fitted-vs-exact curves.
pub const CURVE_STEP: f64 = 0.01;
/// Largest accepted noise magnitude, in percent.
pub const MAX_NOISE_PERCENT: f64 = 50.0;
/// Signed noise levels of the stability tables.
pub const STABILITY_PERCENTS: [f64; 8] = [1.0, -1.0, 3.0, -3.0, 5.0, -5.0, 7.0, -7.0];

/// Which piece of the time axis to fit.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentSpec {
    /// `t = 0, 1, 2`, degree 4, square system.
    Ss1ThreePoint,
    /// `t = 0, 1, 2, 3`, degree 5.
    Ss1,
    /// `t = 3, 4, 5, 6`, degree 5.
    Ss2,
    Custom {
        name: String,
        times: Vec<f64>,
    },
}

impl SegmentSpec {
    pub fn name(&self) -> &str {
        match self {
            SegmentSpec::Ss1ThreePoint => "ss1-3pt",
            SegmentSpec::Ss1 => "ss1",
            SegmentSpec::Ss2 => "ss2",
            SegmentSpec::Custom { name, .. } => name,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        match self {
            SegmentSpec::Ss1ThreePoint => vec![0.0, 1.0, 2.0],
            SegmentSpec::Ss1 => vec![0.0, 1.0, 2.0, 3.0],
            SegmentSpec::Ss2 => vec![3.0, 4.0, 5.0, 6.0],
            SegmentSpec::Custom { times, .. } => times.clone(),
        }
    }

    pub fn default_degree(&self) -> usize {
        match self {
            SegmentSpec::Ss1ThreePoint => 4,
            _ => 5,
        }
    }

    pub fn default_mode(&self) -> SolveMode {
        match self {
            SegmentSpec::Ss1ThreePoint => SolveMode::Square,
            _ => SolveMode::LeastSquares,
        }
    }
}

impl std::str::FromStr for SegmentSpec {
    type Err = SsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss1-3pt" => Ok(SegmentSpec::Ss1ThreePoint),
            "ss1" => Ok(SegmentSpec::Ss1),
            "ss2" => Ok(SegmentSpec::Ss2),
            other => Err(SsmError::InvalidInput(format!(
                "unknown segment `{other}` (expected ss1-3pt, ss1 or ss2)"
            ))),
        }
    }
}

/// Deterministic multiplicative perturbation `v -> v (1 + p/100)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub relative_percent: f64,
    /// Perturb the `t = 0` row too. Off by default: those values are the
    /// initial conditions.
    pub include_initial: bool,
}

impl NoiseSpec {
    pub fn new(relative_percent: f64) -> Result<Self> {
        if relative_percent.is_nan() || relative_percent.abs() > MAX_NOISE_PERCENT {
            return Err(SsmError::InvalidInput(format!(
                "noise of {relative_percent}% exceeds the ±{MAX_NOISE_PERCENT}% bound"
            )));
        }
        Ok(NoiseSpec {
            relative_percent,
            include_initial: false,
        })
    }

    pub fn including_initial(mut self) -> Self {
        self.include_initial = true;
        self
    }
}

pub fn apply_noise(data: &Dataset, spec: &NoiseSpec) -> Dataset {
    let factor = 1.0 + spec.relative_percent / 100.0;
    let rows = data
        .rows
        .iter()
        .map(|r| {
            if r.t > 0.0 || spec.include_initial {
                ConcentrationState::new(r.t, r.ca * factor, r.cb * factor, r.cc * factor)
            } else {
                *r
            }
        })
        .collect();
    Dataset { rows }
}

/// Absolute differences between the closed form and the fitted curves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorGrid {
    pub times: Vec<f64>,
    pub errors: Vec<[f64; 3]>,
}

impl ErrorGrid {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest error of `species` over grid times in `[from, to]`, with the
    /// time where it occurs (first occurrence on ties).
    pub fn max_error(&self, species: usize, from: f64, to: f64) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.errors)
            .filter(|(t, _)| **t >= from - 1e-12 && **t <= to + 1e-12)
            .fold(None, |best: Option<(f64, f64)>, (&t, e)| match best {
                Some((_, b)) if b >= e[species] => best,
                _ => Some((t, e[species])),
            })
    }
}

/// Equally spaced times from `start` to `end` inclusive.
pub fn grid_times(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// `|exact - fitted|` per species on a grid over `[start, end]`.
pub fn error_grid(fit: &FitResult, truth: &RateConstants, start: f64, end: f64, step: f64) -> Result<ErrorGrid> {
    let times = grid_times(start, end, step);
    let errors = times
        .iter()
        .map(|&t| {
            let exact = analytic_solution(truth, 1.0, t)?.concentrations();
            Ok(std::array::from_fn(|s| (exact[s] - fit.polynomials[s].eval(t)).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorGrid { times, errors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub fitted: [f64; 3],
    pub exact: [f64; 3],
}

/// Dense samples of fitted and exact curves for plotting.
pub fn curves(fit: &FitResult, truth: &RateConstants, start: f64, end: f64, step: f64) -> Result<Vec<CurvePoint>> {
    grid_times(start, end, step)
        .into_iter()
        .map(|t| {
            Ok(CurvePoint {
                t,
                fitted: std::array::from_fn(|s| fit.polynomials[s].eval(t)),
                exact: analytic_solution(truth, 1.0, t)?.concentrations(),
            })
        })
        .collect()
}

/// Everything needed to run one segment fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub segment: SegmentSpec,
    pub degree: usize,
    pub mode: SolveMode,
    pub residual_times: Option<ResidualTimes>,
    pub truth: RateConstants,
    /// Decimal places of the generated data; `None` keeps full precision.
    pub rounding: Option<u32>,
    /// Error-grid step; `None` requests no grid.
    pub grid_step: Option<f64>,
    pub noise: Option<NoiseSpec>,
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    /// The reference pipeline for a segment: 4-decimal data, the segment's
    /// default degree and mode, 0.25 s error grid.
    pub fn for_segment(segment: SegmentSpec) -> Self {
        ExperimentConfig {
            degree: segment.default_degree(),
            mode: segment.default_mode(),
            segment,
            residual_times: None,
            truth: RateConstants::REFERENCE,
            rounding: Some(4),
            grid_step: Some(ERROR_GRID_STEP),
            noise: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            mode: self.mode,
            residual_times: self.residual_times.clone(),
        }
    }
}

/// Fits a dataset with the A -> B -> C model.
pub fn fit_dataset(
    data: &Dataset,
    degree: usize,
    options: &AssemblyOptions,
    solver: &SolverConfig,
) -> Result<FitResult> {
    let mechanism = ConsecutiveFirstOrder::default();
    let segment = Segment::from_dataset(data, degree)?;
    let system = assemble(&segment, &mechanism, options)?;
    solve(&system, solver)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitExperiment {
    pub segment: String,
    pub data: Dataset,
    pub fit: FitResult,
    pub grid: ErrorGrid,
}

pub fn run_fit_experiment(cfg: &ExperimentConfig) -> Result<FitExperiment> {
    let times = cfg.segment.times();
    let mut data = generate_dataset(&cfg.truth, &times, cfg.rounding)?;
    if let Some(noise) = &cfg.noise {
        data = apply_noise(&data, noise);
    }
    let fit = fit_dataset(&data, cfg.degree, &cfg.assembly_options(), &cfg.solver)?;
    let grid = match cfg.grid_step {
        Some(step) => error_grid(&fit, &cfg.truth, times[0], times[times.len() - 1], step)?,
        None => ErrorGrid::default(),
    };
    Ok(FitExperiment {
        segment: cfg.segment.name().to_string(),
        data,
        fit,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub noise_percent: f64,
    pub k1: f64,
    pub k2: f64,
    pub k1_err_percent: f64,
    pub k2_err_percent: f64,
    pub converged: bool,
}

fn stability_row(cfg: &ExperimentConfig, percent: f64) -> Result<StabilityRow> {
    let mut run = cfg.clone();
    run.noise = Some(NoiseSpec {
        relative_percent: percent,
        include_initial: cfg.noise.is_some_and(|n| n.include_initial),
    });
    run.grid_step = None;
    NoiseSpec::new(percent)?;
    match run_fit_experiment(&run) {
        Ok(exp) => {
            let k = exp.fit.rate_constants();
            let (e1, e2) = k.percent_error(&cfg.truth);
            Ok(StabilityRow {
                noise_percent: percent,
                k1: k.k1,
                k2: k.k2,
                k1_err_percent: e1,
                k2_err_percent: e2,
                converged: exp.fit.converged,
            })
        }
        // a failed solve is still a row of the table
        Err(SsmError::SingularNormalEquations { .. }) => Ok(StabilityRow {
            noise_percent: percent,
            k1: f64::NAN,
            k2: f64::NAN,
            k1_err_percent: f64::NAN,
            k2_err_percent: f64::NAN,
            converged: false,
        }),
        Err(e) => Err(e),
    }
}

/// Perturbs, fits and grades one row per signed noise level. Rows run on
/// up to `jobs` threads and come back in the order of `percents`.
pub fn run_stability_sweep(cfg: &ExperimentConfig, percents: &[f64], jobs: usize) -> Result<Vec<StabilityRow>> {
    if jobs <= 1 {
        return percents.iter().map(|&p| stability_row(cfg, p)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SsmError::InvalidInput(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| percents.par_iter().map(|&p| stability_row(cfg, p)).collect())
}

/// Fit, grids, curves and (optionally) a noise sweep for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResults {
    pub experiment: FitExperiment,
    pub curves: Vec<CurvePoint>,
    pub stability: Option<Vec<StabilityRow>>,
}

pub fn run_segment(cfg: &ExperimentConfig, sweep: Option<&[f64]>, jobs: usize) -> Result<SegmentResults> {
    let experiment = run_fit_experiment(cfg)?;
    let times = cfg.segment.times();
    let curves = curves(
        &experiment.fit,
        &cfg.truth,
        times[0],
        times[times.len() - 1],
        CURVE_STEP,
    )?;
    let stability = sweep.map(|p| run_stability_sweep(cfg, p, jobs)).transpose()?;
    Ok(SegmentResults {
        experiment,
        curves,
        stability,
    })
}
