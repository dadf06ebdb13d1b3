//! Spline segments and the joint constraint system over polynomial
//! coefficients and rate constants.
//!
//! For a segment with collocation times `t_i`, each species `s` contributes
//!
//! * an interpolation constraint `p_s(t_i) - observed_s(t_i) = 0`, affine in
//!   the unknowns, and
//! * a residual constraint `p_s'(t_i) - f_s(k, p(t_i)) = 0`, which for
//!   first-order networks is bilinear in (coefficients, rate constants).
//!
//! The unknown vector is laid out as one `degree + 1` coefficient block per
//! species, in mechanism order, followed by the rate constants:
//! `(a_0..a_N, b_0..b_N, c_0..c_N, k1, k2)` for A -> B -> C.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::basis::{self, Polynomial};
use crate::error::{Result, SsmError};
use crate::mechanism::{Dataset, Mechanism};

/// Whether the assembled system is pruned to a square one or kept whole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Square,
    LeastSquares,
}

impl SolveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMode::Square => "square",
            SolveMode::LeastSquares => "least_squares",
        }
    }
}

impl std::str::FromStr for SolveMode {
    type Err = SsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(SolveMode::Square),
            "least_squares" | "least-squares" | "lsq" => Ok(SolveMode::LeastSquares),
            other => Err(SsmError::InvalidInput(format!("unknown mode `{other}`"))),
        }
    }
}

/// Collocation times at which residual constraints are imposed.
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualTimes {
    All,
    /// Every segment time except the final one.
    AllButLast,
    Explicit(Vec<f64>),
}

impl ResidualTimes {
    /// Square systems start from every time and are pruned; overdetermined
    /// ones leave out the closing time of the segment.
    pub fn default_for(mode: SolveMode) -> Self {
        match mode {
            SolveMode::Square => ResidualTimes::All,
            SolveMode::LeastSquares => ResidualTimes::AllButLast,
        }
    }

    fn resolve(&self, segment_times: &[f64]) -> Vec<f64> {
        match self {
            ResidualTimes::All => segment_times.to_vec(),
            ResidualTimes::AllButLast => segment_times[..segment_times.len() - 1].to_vec(),
            ResidualTimes::Explicit(t) => t.clone(),
        }
    }
}

/// One spline piece: collocation times, observations and trial degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    times: Vec<f64>,
    observations: Vec<Vec<f64>>,
    degree: usize,
}

impl Segment {
    pub fn new(times: Vec<f64>, observations: Vec<Vec<f64>>, degree: usize) -> Result<Self> {
        if times.len() < 2 {
            return Err(SsmError::InvalidInput(format!(
                "a segment needs at least 2 times, got {}",
                times.len()
            )));
        }
        if times.len() != observations.len() {
            return Err(SsmError::InvalidInput(format!(
                "{} times but {} observations",
                times.len(),
                observations.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SsmError::InvalidInput(
                "segment times must be finite and strictly increasing".into(),
            ));
        }
        let width = observations[0].len();
        if width == 0 || observations.iter().any(|o| o.len() != width) {
            return Err(SsmError::InvalidInput(
                "every observation needs the same non-zero species count".into(),
            ));
        }
        Ok(Segment {
            times,
            observations,
            degree,
        })
    }

    pub fn from_dataset(data: &Dataset, degree: usize) -> Result<Self> {
        Segment::new(
            data.times(),
            data.rows.iter().map(|r| r.concentrations().to_vec()).collect(),
            degree,
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_species(&self) -> usize {
        self.observations[0].len()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Mean spacing between collocation times.
    pub fn time_scale(&self) -> f64 {
        (self.end() - self.start()) / (self.times.len() - 1) as f64
    }
}

/// Checks that `next` starts at the time and observation where `prev` ends.
pub fn check_shared_boundary(prev: &Segment, next: &Segment) -> Result<()> {
    let last = prev.observations.last().expect("segments are non-empty");
    if prev.end() != next.start() || last != &next.observations[0] {
        return Err(SsmError::InvalidInput(format!(
            "segment starting at t={} does not continue from the piece ending at t={}",
            next.start(),
            prev.end()
        )));
    }
    Ok(())
}

/// Positions of each block inside the joint unknown vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLayout {
    pub n_species: usize,
    pub degree: usize,
    pub n_rates: usize,
}

impl UnknownLayout {
    pub fn block_len(&self) -> usize {
        self.degree + 1
    }

    pub fn n_coefficients(&self) -> usize {
        self.n_species * self.block_len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_coefficients() + self.n_rates
    }

    pub fn coefficient_range(&self, species: usize) -> std::ops::Range<usize> {
        let start = species * self.block_len();
        start..start + self.block_len()
    }

    pub fn rate_index(&self, r: usize) -> usize {
        self.n_coefficients() + r
    }
}

/// Joint vector of trial coefficients and rate constants.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownVector {
    layout: UnknownLayout,
    values: DVector<f64>,
}

impl UnknownVector {
    pub fn new(layout: UnknownLayout, values: DVector<f64>) -> Result<Self> {
        if values.len() != layout.n_unknowns() {
            return Err(SsmError::InvalidInput(format!(
                "expected {} unknowns, got {}",
                layout.n_unknowns(),
                values.len()
            )));
        }
        Ok(UnknownVector { layout, values })
    }

    pub fn from_parts(layout: UnknownLayout, coefficients: &[Vec<f64>], rates: &[f64]) -> Result<Self> {
        if coefficients.len() != layout.n_species
            || coefficients.iter().any(|c| c.len() != layout.block_len())
            || rates.len() != layout.n_rates
        {
            return Err(SsmError::InvalidInput(
                "coefficient blocks or rate count do not match the layout".into(),
            ));
        }
        let values = DVector::from_iterator(layout.n_unknowns(), coefficients.iter().flatten().chain(rates).copied());
        Ok(UnknownVector { layout, values })
    }

    pub fn layout(&self) -> UnknownLayout {
        self.layout
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn coefficients(&self, species: usize) -> &[f64] {
        &self.values.as_slice()[self.layout.coefficient_range(species)]
    }

    pub fn rates(&self) -> &[f64] {
        &self.values.as_slice()[self.layout.n_coefficients()..]
    }

    pub fn polynomials(&self) -> Vec<Polynomial> {
        (0..self.layout.n_species)
            .map(|s| Polynomial::new(self.coefficients(s).to_vec()).expect("non-empty block"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Interpolation,
    Residual,
}

impl ConstraintKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintKind::Interpolation => "interpolation",
            ConstraintKind::Residual => "residual",
        }
    }
}

/// A labelled constraint. `observed` is the data value for interpolation
/// constraints and zero for residual ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub species: usize,
    pub t: f64,
    pub observed: f64,
}

/// Interpolation constraints at a single time, one per species.
pub fn interpolation_constraints_at(t: f64, observation: &[f64]) -> Vec<Constraint> {
    observation
        .iter()
        .enumerate()
        .map(|(species, &observed)| Constraint {
            kind: ConstraintKind::Interpolation,
            species,
            t,
            observed,
        })
        .collect()
}

/// Interpolation constraints at every collocation time, time-major.
pub fn interpolation_constraints(seg: &Segment) -> Vec<Constraint> {
    seg.times
        .iter()
        .zip(&seg.observations)
        .flat_map(|(&t, obs)| interpolation_constraints_at(t, obs))
        .collect()
}

/// Residual constraints at `times` for every species, time-major.
pub fn residual_constraints(times: &[f64], n_species: usize) -> Vec<Constraint> {
    times
        .iter()
        .flat_map(|&t| {
            (0..n_species).map(move |species| Constraint {
                kind: ConstraintKind::Residual,
                species,
                t,
                observed: 0.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOptions {
    pub mode: SolveMode,
    /// `None` picks [`ResidualTimes::default_for`] the mode.
    pub residual_times: Option<ResidualTimes>,
}

impl AssemblyOptions {
    pub fn new(mode: SolveMode) -> Self {
        AssemblyOptions {
            mode,
            residual_times: None,
        }
    }

    pub fn with_residual_times(mut self, times: ResidualTimes) -> Self {
        self.residual_times = Some(times);
        self
    }
}

#[derive(Debug, Clone)]
struct Row {
    constraint: Constraint,
    power: Vec<f64>,
    derivative: Vec<f64>,
}

/// The assembled interpolation and residual constraints of one segment.
#[derive(Clone)]
pub struct CollocationSystem<'m> {
    mechanism: &'m dyn Mechanism,
    layout: UnknownLayout,
    mode: SolveMode,
    rows: Vec<Row>,
    segment: Segment,
}

impl std::fmt::Debug for CollocationSystem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollocationSystem")
            .field("layout", &self.layout)
            .field("mode", &self.mode)
            .field("n_equations", &self.n_equations())
            .finish()
    }
}

/// Builds the constraint system for one segment.
///
/// In square mode residual constraints are dropped from the latest time
/// backwards, last species first, until the equation count matches the
/// unknown count.
pub fn assemble<'m>(
    seg: &Segment,
    mechanism: &'m dyn Mechanism,
    options: &AssemblyOptions,
) -> Result<CollocationSystem<'m>> {
    let n_species = mechanism.n_species();
    if seg.n_species() != n_species {
        return Err(SsmError::InvalidInput(format!(
            "segment carries {} species, mechanism has {}",
            seg.n_species(),
            n_species
        )));
    }
    let layout = UnknownLayout {
        n_species,
        degree: seg.degree,
        n_rates: mechanism.n_rate_constants(),
    };
    let residual_times = options
        .residual_times
        .clone()
        .unwrap_or_else(|| ResidualTimes::default_for(options.mode))
        .resolve(&seg.times);
    if residual_times.iter().any(|t| !t.is_finite()) {
        return Err(SsmError::InvalidInput("residual times must be finite".into()));
    }

    let interpolation = interpolation_constraints(seg);
    let mut residual = residual_constraints(&residual_times, n_species);
    let n_unknowns = layout.n_unknowns();

    if options.mode == SolveMode::Square {
        let excess = (interpolation.len() + residual.len()).saturating_sub(n_unknowns);
        if excess > residual.len() {
            return Err(SsmError::InvalidInput(format!(
                "square mode cannot reach {n_unknowns} equations: {} interpolation constraints alone exceed it",
                interpolation.len()
            )));
        }
        // residual is time-major with species ascending, so the tail holds the
        // latest time and the highest species index
        residual.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.species.cmp(&b.species)));
        residual.truncate(residual.len() - excess);
    }

    let n_equations = interpolation.len() + residual.len();
    if n_equations < n_unknowns {
        return Err(SsmError::UnderdeterminedSystem {
            equations: n_equations,
            unknowns: n_unknowns,
        });
    }

    let mut all_times = seg.times.clone();
    all_times.extend(&residual_times);
    basis::check_conditioning(seg.degree, &all_times);

    let rows = interpolation
        .into_iter()
        .chain(residual)
        .map(|constraint| Row {
            power: basis::power_row(seg.degree, constraint.t),
            derivative: basis::derivative_row(seg.degree, constraint.t),
            constraint,
        })
        .collect();

    Ok(CollocationSystem {
        mechanism,
        layout,
        mode: options.mode,
        rows,
        segment: seg.clone(),
    })
}

impl<'m> CollocationSystem<'m> {
    pub fn layout(&self) -> UnknownLayout {
        self.layout
    }

    pub fn mode(&self) -> SolveMode {
        self.mode
    }

    pub fn mechanism(&self) -> &'m dyn Mechanism {
        self.mechanism
    }

    pub fn segment(&self) -> &Segment {
        &self.segment
    }

    pub fn n_unknowns(&self) -> usize {
        self.layout.n_unknowns()
    }

    pub fn n_equations(&self) -> usize {
        self.rows.len()
    }

    pub fn labels(&self) -> Vec<Constraint> {
        self.rows.iter().map(|r| r.constraint).collect()
    }

    fn state_at(&self, row: &Row, u: &[f64]) -> Vec<f64> {
        (0..self.layout.n_species)
            .map(|s| basis::dot(&row.power, &u[self.layout.coefficient_range(s)]))
            .collect()
    }

    fn rates<'a>(&self, u: &'a [f64]) -> &'a [f64] {
        &u[self.layout.n_coefficients()..]
    }

    fn check_len(&self, u: &[f64]) {
        assert_eq!(
            u.len(),
            self.n_unknowns(),
            "unknown vector length does not match the system layout"
        );
    }

    /// Constraint values at `u`, one entry per label.
    pub fn residuals(&self, u: &[f64]) -> DVector<f64> {
        self.check_len(u);
        let k = self.rates(u);
        let mut rhs = vec![0.0; self.layout.n_species];
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                let c = &row.constraint;
                let block = &u[self.layout.coefficient_range(c.species)];
                match c.kind {
                    ConstraintKind::Interpolation => basis::dot(&row.power, block) - c.observed,
                    ConstraintKind::Residual => {
                        let x = self.state_at(row, u);
                        self.mechanism.rhs(k, &x, &mut rhs);
                        basis::dot(&row.derivative, block) - rhs[c.species]
                    }
                }
            }),
        )
    }

    /// Exact partial derivatives of [`residuals`](Self::residuals).
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        self.check_len(u);
        let k = self.rates(u);
        let n = self.layout.n_species;
        let m = self.layout.n_rates;
        let mut jac = DMatrix::zeros(self.rows.len(), self.n_unknowns());
        for (i, row) in self.rows.iter().enumerate() {
            let c = &row.constraint;
            match c.kind {
                ConstraintKind::Interpolation => {
                    for (j, col) in self.layout.coefficient_range(c.species).enumerate() {
                        jac[(i, col)] = row.power[j];
                    }
                }
                ConstraintKind::Residual => {
                    let x = self.state_at(row, u);
                    let dx = self.mechanism.state_jacobian(k, &x);
                    let dk = self.mechanism.rate_jacobian(k, &x);
                    for species in 0..n {
                        let weight = dx[c.species * n + species];
                        for (j, col) in self.layout.coefficient_range(species).enumerate() {
                            let own = if species == c.species { row.derivative[j] } else { 0.0 };
                            jac[(i, col)] = own - weight * row.power[j];
                        }
                    }
                    for r in 0..m {
                        jac[(i, self.layout.rate_index(r))] = -dk[c.species * m + r];
                    }
                }
            }
        }
        jac
    }

    /// For fixed rate constants the constraints are `A(k) c - b`. Returns
    /// `(A, b)`; only meaningful when the mechanism is linear in the state.
    pub fn linear_in_coefficients(&self, rates: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let mut u = vec![0.0; self.n_unknowns()];
        u[self.layout.n_coefficients()..].copy_from_slice(rates);
        let jac = self.jacobian(&u);
        let a = jac.columns(0, self.layout.n_coefficients()).into_owned();
        let b = -self.residuals(&u);
        (a, b)
    }

    /// Plain-text listing, one `kind species t : value` line per constraint.
    pub fn dump(&self, u: &[f64]) -> String {
        let r = self.residuals(u);
        let names = self.mechanism.species();
        let mut out = String::new();
        for (row, value) in self.rows.iter().zip(r.iter()) {
            let c = &row.constraint;
            let _ = writeln!(out, "{} {} {} : {:e}", c.kind.as_str(), names[c.species], c.t, value);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{generate_dataset, ConsecutiveFirstOrder, RateConstants};

    fn ss1_3pt() -> Segment {
        let d = generate_dataset(&RateConstants::REFERENCE, &[0.0, 1.0, 2.0], Some(4)).unwrap();
        Segment::from_dataset(&d, 4).unwrap()
    }

    fn ss2() -> Segment {
        let d = generate_dataset(&RateConstants::REFERENCE, &[3.0, 4.0, 5.0, 6.0], Some(4)).unwrap();
        Segment::from_dataset(&d, 5).unwrap()
    }

    #[test]
    fn segment_validation() {
        assert!(Segment::new(vec![0.0], vec![vec![1.0, 0.0, 0.0]], 4).is_err());
        assert!(Segment::new(vec![0.0, 1.0], vec![vec![1.0, 0.0, 0.0]], 4).is_err());
        assert!(Segment::new(vec![1.0, 0.0], vec![vec![1.0]; 2], 4).is_err());
        assert!(Segment::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0, 2.0]], 4).is_err());
        assert_eq!(ss2().time_scale(), 1.0);
    }

    #[test]
    fn shared_boundary() {
        let k = RateConstants::REFERENCE;
        let full = generate_dataset(&k, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Some(4)).unwrap();
        let a = Segment::from_dataset(&full.window(0.0, 3.0), 5).unwrap();
        let b = Segment::from_dataset(&full.window(3.0, 6.0), 5).unwrap();
        assert!(check_shared_boundary(&a, &b).is_ok());
        assert!(check_shared_boundary(&a, &ss1_3pt()).is_err());
    }

    #[test]
    fn initial_time_interpolation() {
        let c = &interpolation_constraints(&ss1_3pt())[..3];
        let observed: Vec<f64> = c.iter().map(|c| c.observed).collect();
        assert_eq!(observed, vec![1.0, 0.0, 0.0]);
        assert!(c.iter().all(|c| c.t == 0.0 && c.kind == ConstraintKind::Interpolation));
    }

    #[test]
    fn single_time_gives_one_constraint_per_species() {
        assert_eq!(interpolation_constraints_at(0.0, &[1.0, 0.0, 0.0]).len(), 3);
    }

    #[test]
    fn interpolation_row_at_two() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss1_3pt(), &mech, &AssemblyOptions::new(SolveMode::Square)).unwrap();
        // row 6 is species a at t = 2
        let jac = sys.jacobian(&[0.3; 17]);
        let row: Vec<f64> = jac.row(6).iter().copied().collect();
        let mut expected = vec![0.0; 17];
        expected[..5].copy_from_slice(&[1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(row, expected);
        let r = sys.residuals(&[0.0; 17]);
        assert_eq!(r[6], -0.1393);
    }

    #[test]
    fn residual_at_origin_recovers_initial_slopes() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss1_3pt(), &mech, &AssemblyOptions::new(SolveMode::Square)).unwrap();
        // a0 = 1, b0 = 0, a1 = -k1, b1 = k1, c1 = 0 zero the t = 0 residuals
        let (k1, k2) = (0.7, 0.2);
        let mut u = vec![0.0; 17];
        u[0] = 1.0;
        u[1] = -k1;
        u[6] = k1;
        u[15] = k1;
        u[16] = k2;
        let r = sys.residuals(&u);
        for i in 9..12 {
            assert!(r[i].abs() < 1e-15, "row {i}: {}", r[i]);
        }
    }

    #[test]
    fn residual_row_at_four_for_degree_five() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss2(), &mech, &AssemblyOptions::new(SolveMode::LeastSquares)).unwrap();
        let labels = sys.labels();
        let i = labels
            .iter()
            .position(|c| c.kind == ConstraintKind::Residual && c.species == 0 && c.t == 4.0)
            .unwrap();
        let u: Vec<f64> = (0..20).map(|j| 0.1 * (j as f64 + 1.0)).collect();
        let a = &u[0..6];
        let k1 = u[18];
        let expected = a[1]
            + 8.0 * a[2]
            + 48.0 * a[3]
            + 256.0 * a[4]
            + 1280.0 * a[5]
            + k1 * (a[0] + 4.0 * a[1] + 16.0 * a[2] + 64.0 * a[3] + 256.0 * a[4] + 1024.0 * a[5]);
        let got = sys.residuals(&u)[i];
        assert!((got - expected).abs() <= 1e-12 * expected.abs());
    }

    #[test]
    fn residual_rows_vanish_at_origin() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss2(), &mech, &AssemblyOptions::new(SolveMode::LeastSquares)).unwrap();
        let r = sys.residuals(&[0.0; 20]);
        for (c, v) in sys.labels().iter().zip(r.iter()) {
            if c.kind == ConstraintKind::Residual {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn ss1_three_point_square_counts() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss1_3pt(), &mech, &AssemblyOptions::new(SolveMode::Square)).unwrap();
        assert_eq!(sys.n_unknowns(), 17);
        assert_eq!(sys.n_equations(), 17);
        let last = sys.labels()[16];
        assert_eq!((last.kind, last.species, last.t), (ConstraintKind::Residual, 1, 2.0));
    }

    #[test]
    fn ss2_least_squares_counts() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss2(), &mech, &AssemblyOptions::new(SolveMode::LeastSquares)).unwrap();
        assert_eq!(sys.n_unknowns(), 20);
        assert_eq!(sys.n_equations(), 21);
        let residual_times: Vec<f64> = sys
            .labels()
            .iter()
            .filter(|c| c.kind == ConstraintKind::Residual)
            .map(|c| c.t)
            .collect();
        assert_eq!(residual_times, vec![3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn degree_zero_two_times_assembles() {
        let mech = ConsecutiveFirstOrder::default();
        let seg = Segment::new(vec![0.0, 1.0], vec![vec![1.0, 0.0, 0.0], vec![0.4, 0.5, 0.1]], 0).unwrap();
        let opts = AssemblyOptions::new(SolveMode::LeastSquares).with_residual_times(ResidualTimes::All);
        let sys = assemble(&seg, &mech, &opts).unwrap();
        assert_eq!((sys.n_unknowns(), sys.n_equations()), (5, 12));
        assert!(assemble(&seg, &mech, &AssemblyOptions::new(SolveMode::Square)).is_err());
    }

    #[test]
    fn too_few_constraints_is_underdetermined() {
        let mech = ConsecutiveFirstOrder::default();
        let seg = Segment::new(vec![0.0, 1.0], vec![vec![1.0, 0.0, 0.0], vec![0.4, 0.5, 0.1]], 5).unwrap();
        for mode in [SolveMode::Square, SolveMode::LeastSquares] {
            assert!(matches!(
                assemble(&seg, &mech, &AssemblyOptions::new(mode)),
                Err(SsmError::UnderdeterminedSystem { unknowns: 20, .. })
            ));
        }
    }

    #[test]
    fn coefficient_part_is_exact_for_fixed_rates() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss2(), &mech, &AssemblyOptions::new(SolveMode::LeastSquares)).unwrap();
        let rates = [0.9, 0.2];
        let (a, b) = sys.linear_in_coefficients(&rates);
        let c: Vec<f64> = (0..18).map(|j| (j as f64 * 0.37).sin()).collect();
        let mut u = c.clone();
        u.extend(rates);
        let direct = sys.residuals(&u);
        let via_linear = &a * DVector::from_vec(c) - b;
        assert!((direct - via_linear).amax() < 1e-10);
    }

    #[test]
    fn dump_lists_every_constraint() {
        let mech = ConsecutiveFirstOrder::default();
        let sys = assemble(&ss1_3pt(), &mech, &AssemblyOptions::new(SolveMode::Square)).unwrap();
        let text = sys.dump(&[0.0; 17]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 17);
        assert_eq!(lines[0], "interpolation Ca 0 : -1e0");
        assert_eq!(lines[16], "residual Cb 2 : 0e0");
    }
}
