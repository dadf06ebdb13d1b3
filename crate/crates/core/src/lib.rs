//! Spline spectral collocation for recovering rate constants of first-order
//! kinetics from sampled concentration profiles.
//!
//! Each spline segment gets a monomial trial polynomial per species. The
//! polynomials must interpolate the observations and satisfy the ODE at the
//! collocation times; both sets of constraints are solved jointly for the
//! coefficients and the rate constants.

pub mod basis;
pub mod collocation;
pub mod error;
pub mod experiments;
pub mod mechanism;
pub mod reports;
pub mod reproduce;
pub mod solver;

pub use basis::{derivative_row, power_row, Polynomial};
pub use collocation::{
    assemble, AssemblyOptions, CollocationSystem, Constraint, ConstraintKind, ResidualTimes, Segment, SolveMode,
    UnknownLayout, UnknownVector,
};
pub use error::{Result, SsmError};
pub use experiments::{
    apply_noise, run_fit_experiment, run_stability_sweep, ErrorGrid, ExperimentConfig, NoiseSpec, SegmentSpec,
    StabilityRow,
};
pub use mechanism::{
    analytic_solution, generate_dataset, integrate_rk4, rhs_abc, ConcentrationState, ConsecutiveFirstOrder, Dataset,
    Mechanism, RateConstants,
};
pub use solver::{
    initial_guess, solve, solve_varpro, FitResult, InitialGuessPolicy, SolverConfig, Termination, VarproConfig,
};
