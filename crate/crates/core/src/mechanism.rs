//! Parametric kinetics models, the closed-form A -> B -> C profile, an RK4
//! integrator used as an independent oracle, and dataset generation.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SsmError};

/// Numerical slack for non-negativity checks.
pub const POSITIVITY_SLACK: f64 = 1e-12;

/// Relative separation below which `k1` and `k2` count as equal.
pub const EQUAL_RATE_TOLERANCE: f64 = 1e-9;

/// First-order rate constants of A -> B -> C, in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub k1: f64,
    pub k2: f64,
}

impl RateConstants {
    /// Rate constants of the dicyanonaphthalene hydrolysis reference data.
    pub const REFERENCE: RateConstants = RateConstants { k1: 0.9855, k2: 0.1637 };

    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite() && k1 > 0.0 && k2 > 0.0) {
            return Err(SsmError::InvalidInput(format!(
                "rate constants must be finite and positive, got k1={k1}, k2={k2}"
            )));
        }
        Ok(RateConstants { k1, k2 })
    }

    pub fn as_slice(&self) -> [f64; 2] {
        [self.k1, self.k2]
    }

    pub fn are_equal(&self) -> bool {
        (self.k1 - self.k2).abs() / self.k1.abs().max(self.k2.abs()) < EQUAL_RATE_TOLERANCE
    }

    /// `100 |self - truth| / truth` per constant.
    pub fn percent_error(&self, truth: &RateConstants) -> (f64, f64) {
        (
            100.0 * (self.k1 - truth.k1).abs() / truth.k1,
            100.0 * (self.k2 - truth.k2).abs() / truth.k2,
        )
    }
}

/// Normalized concentrations of A, B and C at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationState {
    pub t: f64,
    pub ca: f64,
    pub cb: f64,
    pub cc: f64,
}

impl ConcentrationState {
    pub fn new(t: f64, ca: f64, cb: f64, cc: f64) -> Self {
        ConcentrationState { t, ca, cb, cc }
    }

    pub fn from_slice(t: f64, c: &[f64]) -> Self {
        ConcentrationState::new(t, c[0], c[1], c[2])
    }

    pub fn concentrations(&self) -> [f64; 3] {
        [self.ca, self.cb, self.cc]
    }

    pub fn total(&self) -> f64 {
        self.ca + self.cb + self.cc
    }
}

/// A kinetics ODE `dX/dt = f(k, X)`.
///
/// Jacobians are exact; collocation uses them for the residual rows.
pub trait Mechanism: Send + Sync {
    fn species(&self) -> &[&'static str];

    fn n_rate_constants(&self) -> usize;

    fn initial_state(&self) -> Vec<f64>;

    fn rhs(&self, k: &[f64], x: &[f64], out: &mut [f64]);

    /// `∂f_i/∂x_j`, row-major `n x n`.
    fn state_jacobian(&self, k: &[f64], x: &[f64]) -> Vec<f64>;

    /// `∂f_i/∂k_r`, row-major `n x m`.
    fn rate_jacobian(&self, k: &[f64], x: &[f64]) -> Vec<f64>;

    /// True when `f(k, x) = M(k) x`, i.e. a first-order network. Variable
    /// projection relies on it.
    fn is_linear_in_state(&self) -> bool {
        false
    }

    fn n_species(&self) -> usize {
        self.species().len()
    }
}

/// `(-k1 Ca, k1 Ca - k2 Cb, k2 Cb)`.
pub fn rhs_abc(k: &RateConstants, s: &ConcentrationState) -> [f64; 3] {
    let forward = k.k1 * s.ca;
    let onward = k.k2 * s.cb;
    [-forward, forward - onward, onward]
}

/// Consecutive first-order reactions A -> B -> C starting from pure A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsecutiveFirstOrder {
    pub ca0: f64,
}

impl Default for ConsecutiveFirstOrder {
    fn default() -> Self {
        ConsecutiveFirstOrder { ca0: 1.0 }
    }
}

const ABC_SPECIES: [&str; 3] = ["Ca", "Cb", "Cc"];

impl Mechanism for ConsecutiveFirstOrder {
    fn species(&self) -> &[&'static str] {
        &ABC_SPECIES
    }

    fn n_rate_constants(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.ca0, 0.0, 0.0]
    }

    fn rhs(&self, k: &[f64], x: &[f64], out: &mut [f64]) {
        let forward = k[0] * x[0];
        let onward = k[1] * x[1];
        out[0] = -forward;
        out[1] = forward - onward;
        out[2] = onward;
    }

    fn state_jacobian(&self, k: &[f64], _x: &[f64]) -> Vec<f64> {
        vec![
            -k[0], 0.0, 0.0, //
            k[0], -k[1], 0.0, //
            0.0, k[1], 0.0,
        ]
    }

    fn rate_jacobian(&self, _k: &[f64], x: &[f64]) -> Vec<f64> {
        vec![
            -x[0], 0.0, //
            x[0], -x[1], //
            0.0, x[1],
        ]
    }

    fn is_linear_in_state(&self) -> bool {
        true
    }
}

/// Closed-form concentrations of A -> B -> C for `k1 != k2`.
pub fn analytic_solution(k: &RateConstants, ca0: f64, t: f64) -> Result<ConcentrationState> {
    if k.are_equal() {
        return Err(SsmError::EqualRateConstants { k1: k.k1, k2: k.k2 });
    }
    if t < 0.0 {
        return Err(SsmError::InvalidInput(format!("negative time {t}")));
    }
    let ea = (-k.k1 * t).exp();
    let eb = (-k.k2 * t).exp();
    let ca = ca0 * ea;
    // adding 0.0 clears the sign of the zero produced at t = 0 when k1 > k2
    let cb = ca0 * k.k1 / (k.k2 - k.k1) * (ea - eb) + 0.0;
    Ok(ConcentrationState::new(t, ca, cb, ca0 - ca - cb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: Vec<f64>,
}

/// Classical fourth-order Runge-Kutta from the mechanism's initial state,
/// sampled at every step. The final step is shortened to land on `t_end`.
pub fn integrate_rk4(m: &dyn Mechanism, k: &[f64], t_end: f64, h: f64) -> Result<Vec<TrajectoryPoint>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SsmError::InvalidInput(format!("step must be positive, got {h}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SsmError::InvalidInput(format!("t_end must be >= 0, got {t_end}")));
    }
    let n = m.n_species();
    let mut x = m.initial_state();
    let steps = (t_end / h - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TrajectoryPoint {
        t: 0.0,
        state: x.clone(),
    });

    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut t = 0.0;
    for i in 1..=steps {
        let t_next = if i == steps { t_end } else { i as f64 * h };
        let dt = t_next - t;
        m.rhs(k, &x, &mut k1);
        axpy(&x, 0.5 * dt, &k1, &mut tmp);
        m.rhs(k, &tmp, &mut k2);
        axpy(&x, 0.5 * dt, &k2, &mut tmp);
        m.rhs(k, &tmp, &mut k3);
        axpy(&x, dt, &k3, &mut tmp);
        m.rhs(k, &tmp, &mut k4);
        for j in 0..n {
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SsmError::NonFiniteState { t: t_next });
        }
        t = t_next;
        out.push(TrajectoryPoint { t, state: x.clone() });
    }
    Ok(out)
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Rounds half away from zero to `decimals` places.
pub fn round_to(v: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round() / scale
}

/// Observed concentrations at increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<ConcentrationState>,
}

impl Dataset {
    pub fn new(rows: Vec<ConcentrationState>) -> Result<Self> {
        if rows.is_empty() {
            return Err(SsmError::MalformedData("dataset has no rows".into()));
        }
        validate_times(&rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
        Ok(Dataset { rows })
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows whose time lies in `[start, end]`.
    pub fn window(&self, start: f64, end: f64) -> Dataset {
        Dataset {
            rows: self
                .rows
                .iter()
                .filter(|r| r.t >= start && r.t <= end)
                .copied()
                .collect(),
        }
    }

    /// CSV with header `t,Ca,Cb,Cc`. Values print in shortest round-trip
    /// form, so unrounded data reloads bit-exactly.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().from_writer(w);
        let map = |e: csv::Error| SsmError::MalformedData(e.to_string());
        wtr.write_record(["t", "Ca", "Cb", "Cc"]).map_err(map)?;
        for r in &self.rows {
            wtr.write_record([r.t.to_string(), r.ca.to_string(), r.cb.to_string(), r.cc.to_string()])
                .map_err(map)?;
        }
        wtr.flush().map_err(|e| SsmError::MalformedData(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr
            .headers()
            .map_err(|e| SsmError::MalformedData(e.to_string()))?
            .clone();
        let expected = ["t", "Ca", "Cb", "Cc"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(SsmError::MalformedData(format!(
                "expected header `t,Ca,Cb,Cc`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| SsmError::MalformedData(e.to_string()))?;
            let mut v = [0.0; 4];
            for (i, field) in record.iter().enumerate() {
                v[i] = field
                    .parse()
                    .map_err(|_| SsmError::MalformedData(format!("row {}: cannot parse `{field}`", line + 2)))?;
            }
            rows.push(ConcentrationState::new(v[0], v[1], v[2], v[3]));
        }
        Dataset::new(rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| SsmError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| SsmError::io(path, e))?;
        Dataset::read_csv(std::io::BufReader::new(file))
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(SsmError::InvalidInput(format!("time {t} must be finite and >= 0")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SsmError::InvalidInput("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Samples the closed form at `times`, optionally rounding every
/// concentration to `rounding` decimals.
pub fn generate_dataset(k: &RateConstants, times: &[f64], rounding: Option<u32>) -> Result<Dataset> {
    if times.is_empty() {
        return Err(SsmError::InvalidInput("no sample times".into()));
    }
    validate_times(times)?;
    let rows = times
        .iter()
        .map(|&t| {
            let mut s = analytic_solution(k, 1.0, t)?;
            if let Some(d) = rounding {
                s.ca = round_to(s.ca, d);
                s.cb = round_to(s.cb, d);
                s.cc = round_to(s.cc, d);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { rows })
}
