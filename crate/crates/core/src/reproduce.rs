//! The full reference pipeline: three segment fits, both error grids, both
//! stability sweeps, and a summary graded against reference values.

use std::path::{Path, PathBuf};

use crate::error::{Result, SsmError};
use crate::experiments::{
    run_segment, ExperimentConfig, SegmentResults, SegmentSpec, StabilityRow, STABILITY_PERCENTS,
};
use crate::mechanism::RateConstants;
use crate::reports;

/// Reference rate constants and the tolerance each one is held to.
pub struct FitReference {
    pub segment: SegmentSpec,
    pub k1: f64,
    pub k1_tolerance: f64,
    pub k2: f64,
    pub k2_tolerance: f64,
}

pub fn fit_references() -> [FitReference; 3] {
    [
        FitReference {
            segment: SegmentSpec::Ss1ThreePoint,
            k1: 0.980855,
            k1_tolerance: 1e-3,
            k2: 0.164535,
            k2_tolerance: 1e-3,
        },
        FitReference {
            segment: SegmentSpec::Ss1,
            k1: 0.9842,
            k1_tolerance: 2e-3,
            k2: 0.1639,
            k2_tolerance: 1e-3,
        },
        FitReference {
            segment: SegmentSpec::Ss2,
            k1: 0.98649,
            k1_tolerance: 1e-3,
            k2: 0.16373,
            k2_tolerance: 5e-4,
        },
    ]
}

/// SS1 grid bound over `t >= 0.5`: twice the largest reference table entry.
pub const SS1_GRID_MAX: f64 = 0.004;
pub const SS1_GRID_FROM: f64 = 0.5;
pub const SS2_CA_GRID_MAX: f64 = 0.02;
/// Time of the reference SS2 Ca error maximum.
pub const SS2_CA_ARGMAX_TIME: f64 = 6.0;
pub const SS1_K1_ERR_AT_7: (f64, f64) = (1.5, 3.0);
/// Allowed drop, in percentage points, between successive |noise| levels.
pub const MONOTONE_SLACK: f64 = 0.3;
pub const SS2_K1_ERR_MAX: f64 = 1.0;
pub const SS2_K2_ERR_MAX: f64 = 0.2;

/// One graded line of the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub measured: f64,
    pub lower: f64,
    pub upper: f64,
    pub reference: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn within(id: impl Into<String>, measured: f64, lower: f64, upper: f64, reference: Option<f64>) -> Self {
        Check {
            id: id.into(),
            measured,
            lower,
            upper,
            reference,
            pass: measured >= lower && measured <= upper,
        }
    }

    pub fn around(id: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        Check::within(
            id,
            measured,
            reference - tolerance,
            reference + tolerance,
            Some(reference),
        )
    }

    pub fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.id,
            self.measured,
            self.lower,
            self.upper,
            self.reference.map(|r| r.to_string()).unwrap_or_default(),
            if self.pass { "pass" } else { "fail" }
        )
    }
}

pub const SUMMARY_HEADER: &str = "check,measured,lower,upper,reference,result";

fn find(rows: &[StabilityRow], percent: f64) -> Option<&StabilityRow> {
    rows.iter().find(|r| r.noise_percent == percent)
}

/// Largest drop in k1 error when |noise| grows, for one sign.
pub fn monotone_violation(rows: &[StabilityRow], sign: f64) -> f64 {
    let mut series: Vec<&StabilityRow> = rows.iter().filter(|r| r.noise_percent * sign > 0.0).collect();
    series.sort_by(|a, b| a.noise_percent.abs().total_cmp(&b.noise_percent.abs()));
    series
        .windows(2)
        .map(|w| w[0].k1_err_percent - w[1].k1_err_percent)
        .fold(0.0, f64::max)
}

pub fn fit_checks(results: &[(FitReference, SegmentResults)]) -> Vec<Check> {
    let mut checks = Vec::new();
    for (reference, r) in results {
        let k = r.experiment.fit.rate_constants();
        let name = reference.segment.name();
        checks.push(Check::around(
            format!("fit/{name}/k1"),
            k.k1,
            reference.k1,
            reference.k1_tolerance,
        ));
        checks.push(Check::around(
            format!("fit/{name}/k2"),
            k.k2,
            reference.k2,
            reference.k2_tolerance,
        ));
    }
    checks
}

pub fn grid_checks(ss1: &SegmentResults, ss2: &SegmentResults) -> Vec<Check> {
    let mut checks = Vec::new();
    for (s, species) in ["Ca", "Cb", "Cc"].iter().enumerate() {
        let (_, e) = ss1
            .experiment
            .grid
            .max_error(s, SS1_GRID_FROM, 3.0)
            .unwrap_or((f64::NAN, f64::NAN));
        checks.push(Check::within(
            format!("grid/ss1/{species}_max"),
            e,
            0.0,
            SS1_GRID_MAX,
            None,
        ));
    }
    let (t, e) = ss2
        .experiment
        .grid
        .max_error(0, 3.0, 6.0)
        .unwrap_or((f64::NAN, f64::NAN));
    checks.push(Check::within("grid/ss2/Ca_max", e, 0.0, SS2_CA_GRID_MAX, Some(0.0106)));
    checks.push(Check::within(
        "grid/ss2/Ca_argmax_t",
        t,
        SS2_CA_ARGMAX_TIME,
        SS2_CA_ARGMAX_TIME,
        Some(SS2_CA_ARGMAX_TIME),
    ));
    checks
}

pub fn stability_checks(ss1: &[StabilityRow], ss2: &[StabilityRow]) -> Vec<Check> {
    let mut checks = Vec::new();
    let (lo, hi) = SS1_K1_ERR_AT_7;
    for (p, reference) in [(7.0, 1.68), (-7.0, 2.19)] {
        let e = find(ss1, p).map_or(f64::NAN, |r| r.k1_err_percent);
        checks.push(Check::within(
            format!("stability/ss1/k1_err_at_{p:+}"),
            e,
            lo,
            hi,
            Some(reference),
        ));
    }
    for sign in [1.0, -1.0] {
        let label = if sign > 0.0 { "positive" } else { "negative" };
        checks.push(Check::within(
            format!("stability/ss1/k1_err_monotone_{label}"),
            monotone_violation(ss1, sign),
            f64::NEG_INFINITY,
            MONOTONE_SLACK,
            None,
        ));
    }
    let worst = |f: fn(&StabilityRow) -> f64| {
        ss2.iter()
            .map(f)
            .fold(f64::NEG_INFINITY, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
    };
    checks.push(Check::within(
        "stability/ss2/k1_err_max",
        worst(|r| r.k1_err_percent),
        0.0,
        SS2_K1_ERR_MAX,
        Some(0.439),
    ));
    checks.push(Check::within(
        "stability/ss2/k2_err_max",
        worst(|r| r.k2_err_percent),
        0.0,
        SS2_K2_ERR_MAX,
        Some(0.0549),
    ));
    let all_converged = ss1.iter().chain(ss2).all(|r| r.converged);
    checks.push(Check::within(
        "stability/all_converged",
        f64::from(u8::from(all_converged)),
        1.0,
        1.0,
        None,
    ));
    checks
}

pub struct Reproduction {
    pub fits: Vec<(FitReference, SegmentResults)>,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn segment(&self, spec: &SegmentSpec) -> &SegmentResults {
        &self
            .fits
            .iter()
            .find(|(r, _)| &r.segment == spec)
            .expect("segment ran")
            .1
    }
}

/// Runs the three reference fits; SS1 and SS2 also get noise sweeps.
pub fn reproduce(jobs: usize) -> Result<Reproduction> {
    let mut fits = Vec::new();
    for reference in fit_references() {
        let cfg = ExperimentConfig::for_segment(reference.segment.clone());
        let sweep = match reference.segment {
            SegmentSpec::Ss1 | SegmentSpec::Ss2 => Some(&STABILITY_PERCENTS[..]),
            _ => None,
        };
        let results = run_segment(&cfg, sweep, jobs)?;
        fits.push((reference, results));
    }
    let mut rep = Reproduction {
        fits,
        checks: Vec::new(),
    };
    let ss1 = rep.segment(&SegmentSpec::Ss1);
    let ss2 = rep.segment(&SegmentSpec::Ss2);
    let mut checks = fit_checks(&rep.fits);
    checks.extend(grid_checks(ss1, ss2));
    checks.extend(stability_checks(
        ss1.stability.as_deref().unwrap_or_default(),
        ss2.stability.as_deref().unwrap_or_default(),
    ));
    rep.checks = checks;
    Ok(rep)
}

/// Writes every segment report plus `summary.csv`.
pub fn write_reproduction(dir: &Path, rep: &Reproduction) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (_, results) in &rep.fits {
        written.extend(reports::render_reports(dir, results, &RateConstants::REFERENCE)?);
    }
    let path = dir.join("summary.csv");
    let body: String = std::iter::once(SUMMARY_HEADER.to_string())
        .chain(rep.checks.iter().map(Check::line))
        .map(|l| l + "\n")
        .collect();
    std::fs::write(&path, body).map_err(|e| SsmError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
