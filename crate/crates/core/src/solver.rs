//! Solvers for an assembled [`CollocationSystem`].
//!
//! [`solve`] runs damped Gauss-Newton (Levenberg-Marquardt) on the joint
//! unknown vector. [`solve_varpro`] is an independent route: for fixed rate
//! constants the constraints are affine in the coefficients, so it eliminates
//! them with a linear least-squares solve and minimizes the projected
//! residual over the rate constants alone with Nelder-Mead.

use nalgebra::{DMatrix, DVector, SVD};

use crate::basis::Polynomial;
use crate::collocation::{CollocationSystem, SolveMode, UnknownVector};
use crate::error::{Result, SsmError};
use crate::mechanism::RateConstants;

/// Damping above which no descent step is considered reachable.
const DAMPING_MAX: f64 = 1e16;
const DAMPING_MIN: f64 = 1e-20;
/// Gradient cosine below which a stalled least-squares solve counts as
/// converged.
const STALL_COSINE: f64 = 1e-6;
/// Relative singular-value cutoff for rank decisions.
const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuessPolicy {
    /// Every rate constant at `1 / time_scale` of the segment.
    Default,
    /// Given rate constants; coefficients still come from interpolation.
    Rates(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Infinity norm of the constraint vector.
    pub residual_tolerance: f64,
    /// Relative step size `|du| <= tol (|u| + tol)`.
    pub step_tolerance: f64,
    /// Largest cosine between the residual and a Jacobian column
    /// (least-squares mode only).
    pub gradient_tolerance: f64,
    pub damping_initial: f64,
    pub damping_growth: f64,
    pub damping_shrink: f64,
    pub initial_guess: InitialGuessPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 100,
            residual_tolerance: 1e-12,
            step_tolerance: 1e-12,
            gradient_tolerance: 1e-10,
            damping_initial: 1e-3,
            damping_growth: 10.0,
            damping_shrink: 0.1,
            initial_guess: InitialGuessPolicy::Default,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SsmError::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        positive("residual_tolerance", self.residual_tolerance)?;
        positive("step_tolerance", self.step_tolerance)?;
        positive("gradient_tolerance", self.gradient_tolerance)?;
        positive("damping_initial", self.damping_initial)?;
        if self.max_iterations == 0 {
            return Err(SsmError::InvalidInput("max_iterations must be >= 1".into()));
        }
        if !(self.damping_growth > 1.0 && self.damping_growth.is_finite()) {
            return Err(SsmError::InvalidInput("damping_growth must exceed 1".into()));
        }
        if !(self.damping_shrink > 0.0 && self.damping_shrink < 1.0) {
            return Err(SsmError::InvalidInput("damping_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ResidualTolerance,
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    NegativeRateConstants,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ResidualTolerance => "residual_tolerance",
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::StepTolerance => "step_tolerance",
            Termination::MaxIterations => "max_iterations",
            Termination::NegativeRateConstants => "negative_rate_constants",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub rates: Vec<f64>,
    pub polynomials: Vec<Polynomial>,
    pub unknowns: UnknownVector,
    /// Infinity norm of the constraint vector at the returned iterate.
    pub final_residual_norm: f64,
    pub residual_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub mode: SolveMode,
    /// Euclidean residual norm after the initial guess and every accepted step.
    pub residual_history: Vec<f64>,
    pub restarted: bool,
}

impl FitResult {
    /// The first two rate constants as `(k1, k2)`.
    pub fn rate_constants(&self) -> RateConstants {
        assert!(self.rates.len() >= 2, "mechanism has fewer than two rate constants");
        RateConstants {
            k1: self.rates[0],
            k2: self.rates[1],
        }
    }
}

/// Starting point: rate constants from `policy`, coefficients from the
/// minimum-norm least-squares fit of the interpolation constraints alone.
pub fn initial_guess(sys: &CollocationSystem<'_>, policy: &InitialGuessPolicy) -> Result<UnknownVector> {
    let layout = sys.layout();
    let seg = sys.segment();
    let rates = match policy {
        InitialGuessPolicy::Default => vec![1.0 / seg.time_scale(); layout.n_rates],
        InitialGuessPolicy::Rates(r) => {
            if r.len() != layout.n_rates {
                return Err(SsmError::InvalidInput(format!(
                    "initial guess has {} rate constants, mechanism needs {}",
                    r.len(),
                    layout.n_rates
                )));
            }
            r.clone()
        }
    };
    let vandermonde = DMatrix::from_fn(seg.times().len(), layout.block_len(), |i, j| {
        seg.times()[i].powi(j as i32)
    });
    let svd = SVD::new(vandermonde, true, true);
    let eps = RANK_EPS * svd.singular_values.max();
    let coefficients = (0..layout.n_species)
        .map(|s| {
            let obs = DVector::from_iterator(seg.times().len(), seg.observations().iter().map(|o| o[s]));
            svd.solve(&obs, eps)
                .map(|c| c.as_slice().to_vec())
                .map_err(|e| SsmError::InvalidInput(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    UnknownVector::from_parts(layout, &coefficients, &rates)
}

/// Damped Gauss-Newton with Marquardt scaling. Returns the best iterate;
/// hitting `max_iterations` yields `converged = false` rather than an error.
pub fn solve(sys: &CollocationSystem<'_>, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    if sys.n_equations() < sys.n_unknowns() {
        return Err(SsmError::UnderdeterminedSystem {
            equations: sys.n_equations(),
            unknowns: sys.n_unknowns(),
        });
    }
    let guess = initial_guess(sys, &cfg.initial_guess)?;
    let first = levenberg_marquardt(sys, guess.values().clone(), cfg)?;
    if !has_negative_rate(sys, &first.u) {
        return Ok(finish(sys, first, false));
    }

    let mut retry = guess.values().clone();
    let n_coeff = sys.layout().n_coefficients();
    for v in retry.iter_mut().skip(n_coeff) {
        *v *= 1.5;
    }
    let mut second = levenberg_marquardt(sys, retry, cfg)?;
    if has_negative_rate(sys, &second.u) {
        second.converged = false;
        second.termination = Termination::NegativeRateConstants;
    }
    Ok(finish(sys, second, true))
}

fn has_negative_rate(sys: &CollocationSystem<'_>, u: &DVector<f64>) -> bool {
    u.iter().skip(sys.layout().n_coefficients()).any(|k| *k < 0.0)
}

struct Iterate {
    u: DVector<f64>,
    iterations: usize,
    converged: bool,
    termination: Termination,
    history: Vec<f64>,
}

fn finish(sys: &CollocationSystem<'_>, it: Iterate, restarted: bool) -> FitResult {
    let r = sys.residuals(it.u.as_slice());
    let unknowns = UnknownVector::new(sys.layout(), it.u).expect("layout-sized iterate");
    FitResult {
        rates: unknowns.rates().to_vec(),
        polynomials: unknowns.polynomials(),
        final_residual_norm: r.amax(),
        residual_l2: r.norm(),
        iterations: it.iterations,
        converged: it.converged,
        termination: it.termination,
        mode: sys.mode(),
        residual_history: it.history,
        restarted,
        unknowns,
    }
}

/// Largest cosine between `r` and any column of `jac`.
fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let r_norm = r.norm();
    if r_norm == 0.0 {
        return 0.0;
    }
    jac.column_iter()
        .map(|col| {
            let n = col.norm();
            if n == 0.0 {
                0.0
            } else {
                col.dot(r).abs() / (n * r_norm)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves `min |J d + r|^2 + damping |D d|^2` through the augmented system,
/// avoiding the squared conditioning of the normal equations.
fn damped_step(jac: &DMatrix<f64>, r: &DVector<f64>, scale: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let (m, n) = jac.shape();
    let mut aug = DMatrix::zeros(m + n, n);
    aug.view_mut((0, 0), (m, n)).copy_from(jac);
    let root = damping.sqrt();
    for j in 0..n {
        aug[(m + j, j)] = root * scale[j];
    }
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(&(-r));
    let svd = SVD::new(aug, true, true);
    let eps = RANK_EPS * svd.singular_values.max();
    svd.solve(&rhs, eps).ok()
}

fn levenberg_marquardt(sys: &CollocationSystem<'_>, mut u: DVector<f64>, cfg: &SolverConfig) -> Result<Iterate> {
    let least_squares = sys.mode() == SolveMode::LeastSquares;
    let mut r = sys.residuals(u.as_slice());
    let mut cost = r.norm_squared();
    let mut damping = cfg.damping_initial;
    let mut history = vec![cost.sqrt()];

    let done = |u: DVector<f64>, iterations, termination, history| Iterate {
        u,
        iterations,
        converged: termination != Termination::MaxIterations,
        termination,
        history,
    };

    for iter in 0..cfg.max_iterations {
        if r.amax() <= cfg.residual_tolerance {
            return Ok(done(u, iter, Termination::ResidualTolerance, history));
        }
        let jac = sys.jacobian(u.as_slice());
        if least_squares && gradient_cosine(&jac, &r) <= cfg.gradient_tolerance {
            return Ok(done(u, iter, Termination::GradientTolerance, history));
        }
        let scale = DVector::from_iterator(
            jac.ncols(),
            jac.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE.sqrt())),
        );

        let accepted = loop {
            if damping > DAMPING_MAX {
                break None;
            }
            let Some(step) = damped_step(&jac, &r, &scale, damping) else {
                damping *= cfg.damping_growth;
                continue;
            };
            let candidate = &u + &step;
            let r_new = sys.residuals(candidate.as_slice());
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                damping = (damping * cfg.damping_shrink).max(DAMPING_MIN);
                break Some((candidate, r_new, cost_new, step));
            }
            damping *= cfg.damping_growth;
        };

        let Some((candidate, r_new, cost_new, step)) = accepted else {
            if least_squares && gradient_cosine(&jac, &r) <= STALL_COSINE {
                return Ok(done(u, iter, Termination::StepTolerance, history));
            }
            return Err(SsmError::SingularNormalEquations { iteration: iter });
        };

        let small_step = step.norm() <= cfg.step_tolerance * (u.norm() + cfg.step_tolerance);
        u = candidate;
        r = r_new;
        cost = cost_new;
        history.push(cost.sqrt());
        if r.amax() <= cfg.residual_tolerance {
            return Ok(done(u, iter + 1, Termination::ResidualTolerance, history));
        }
        if least_squares && small_step {
            return Ok(done(u, iter + 1, Termination::StepTolerance, history));
        }
    }
    Ok(done(u, cfg.max_iterations, Termination::MaxIterations, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarproConfig {
    /// Starting rate constants; `None` uses the default initial-guess policy.
    pub seed: Option<Vec<f64>>,
    pub max_iterations: usize,
    /// Simplex diameter, relative to the best vertex, at which to stop.
    pub tolerance: f64,
}

impl Default for VarproConfig {
    fn default() -> Self {
        VarproConfig {
            seed: None,
            max_iterations: 5000,
            tolerance: 1e-13,
        }
    }
}

/// Coefficients minimizing the constraint norm at fixed rate constants, and
/// that minimal Euclidean norm.
pub fn project_coefficients(sys: &CollocationSystem<'_>, rates: &[f64]) -> Result<(DVector<f64>, f64)> {
    let (a, b) = sys.linear_in_coefficients(rates);
    let required = a.ncols();
    let svd = SVD::new(a.clone(), true, true);
    let eps = RANK_EPS * svd.singular_values.max();
    let rank = svd.rank(eps);
    if rank < required {
        return Err(SsmError::RankDeficientInnerSystem {
            rank,
            required,
            rates: rates.to_vec(),
        });
    }
    let c = svd.solve(&b, eps).map_err(|e| SsmError::InvalidInput(e.to_string()))?;
    let norm = (&a * &c - &b).norm();
    Ok((c, norm))
}

/// Variable projection: Nelder-Mead over the rate constants on the
/// projected residual norm.
pub fn solve_varpro(sys: &CollocationSystem<'_>, cfg: &VarproConfig) -> Result<FitResult> {
    if !sys.mechanism().is_linear_in_state() {
        return Err(SsmError::NonlinearMechanism);
    }
    let seed = match &cfg.seed {
        Some(s) => s.clone(),
        None => initial_guess(sys, &InitialGuessPolicy::Default)?.rates().to_vec(),
    };
    if seed.len() != sys.layout().n_rates {
        return Err(SsmError::InvalidInput("varpro seed has the wrong length".into()));
    }
    let seed_value = project_coefficients(sys, &seed)?.1.powi(2);
    let objective = |k: &[f64]| match project_coefficients(sys, k) {
        Ok((_, n)) => n * n,
        Err(_) => f64::INFINITY,
    };
    let nm = nelder_mead(objective, &seed, seed_value, cfg.max_iterations, cfg.tolerance);

    let (c, _) = project_coefficients(sys, &nm.best)?;
    let mut values = c.as_slice().to_vec();
    values.extend(&nm.best);
    let u = DVector::from_vec(values);
    let r = sys.residuals(u.as_slice());
    let unknowns = UnknownVector::new(sys.layout(), u)?;
    Ok(FitResult {
        rates: nm.best,
        polynomials: unknowns.polynomials(),
        final_residual_norm: r.amax(),
        residual_l2: r.norm(),
        iterations: nm.iterations,
        converged: nm.converged,
        termination: if nm.converged {
            Termination::StepTolerance
        } else {
            Termination::MaxIterations
        },
        mode: sys.mode(),
        residual_history: nm.history.iter().map(|v| v.sqrt()).collect(),
        restarted: false,
        unknowns,
    })
}

struct NelderMead {
    best: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    seed: &[f64],
    seed_value: f64,
    max_iterations: usize,
    tolerance: f64,
) -> NelderMead {
    let n = seed.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(seed.to_vec(), seed_value)];
    for i in 0..n {
        let mut v = seed.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * 1.1 } else { 0.05 };
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let mut history = Vec::new();

    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    for iter in 0..max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let best = &simplex[0].0;
        let scale = best.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= tolerance * scale {
            return NelderMead {
                best: simplex[0].0.clone(),
                iterations: iter,
                converged: true,
                history,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflected = point(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = point(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = point(&centroid, &reflected, 0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = point(&centroid, &worst.0, 0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let shrunk = point(&best, &vertex.0, 0.5);
            let fs = f(&shrunk);
            *vertex = (shrunk, fs);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMead {
        best: simplex[0].0.clone(),
        iterations: max_iterations,
        converged: false,
        history,
    }
}
