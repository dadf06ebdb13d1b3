//! CSV reports: fit summaries, error grids, stability tables and dense
//! curves. UTF-8, comma separated, mandatory header, LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Result, SsmError};
use crate::experiments::{CurvePoint, ErrorGrid, SegmentResults, StabilityRow};
use crate::mechanism::{Mechanism, RateConstants};
use crate::solver::FitResult;

pub const STABILITY_HEADER: &str = "noise_percent,k1,k2,k1_err_percent,k2_err_percent,converged";
pub const ERRORS_HEADER: &str = "t,Ca_abs_err,Cb_abs_err,Cc_abs_err";
pub const CURVES_HEADER: &str = "t,Ca_fit,Cb_fit,Cc_fit,Ca_exact,Cb_exact,Cc_exact";
pub const FIT_HEADER: &str = "field,value";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| SsmError::io(path, e))
}

fn write_lines(path: &Path, header: &str, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| SsmError::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for line in lines {
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Key/value listing of a fit: rate constants, optional errors against a
/// known truth, diagnostics, then every coefficient.
pub fn fit_lines(fit: &FitResult, truth: Option<&RateConstants>) -> Vec<String> {
    let species = crate::mechanism::ConsecutiveFirstOrder::default();
    let names = species.species();
    let mut out = Vec::new();
    for (i, k) in fit.rates.iter().enumerate() {
        out.push(format!("k{},{}", i + 1, k));
    }
    if let Some(truth) = truth {
        let (e1, e2) = fit.rate_constants().percent_error(truth);
        out.push(format!("k1_err_percent,{e1}"));
        out.push(format!("k2_err_percent,{e2}"));
    }
    out.push(format!("mode,{}", fit.mode.as_str()));
    out.push(format!("converged,{}", fit.converged));
    out.push(format!("termination,{}", fit.termination.as_str()));
    out.push(format!("iterations,{}", fit.iterations));
    out.push(format!("final_residual_norm,{}", fit.final_residual_norm));
    out.push(format!("residual_l2,{}", fit.residual_l2));
    for (s, p) in fit.polynomials.iter().enumerate() {
        let prefix = names.get(s).copied().unwrap_or("X");
        for (n, c) in p.coefficients().iter().enumerate() {
            out.push(format!("{prefix}_c{n},{c}"));
        }
    }
    out
}

pub fn write_fit(path: &Path, fit: &FitResult, truth: Option<&RateConstants>) -> Result<()> {
    write_lines(path, FIT_HEADER, fit_lines(fit, truth))
}

pub fn write_errors(path: &Path, grid: &ErrorGrid) -> Result<()> {
    write_lines(
        path,
        ERRORS_HEADER,
        grid.times
            .iter()
            .zip(&grid.errors)
            .map(|(t, e)| format!("{t:.2},{},{},{}", e[0], e[1], e[2])),
    )
}

pub fn stability_line(r: &StabilityRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.noise_percent, r.k1, r.k2, r.k1_err_percent, r.k2_err_percent, r.converged
    )
}

pub fn write_stability(path: &Path, rows: &[StabilityRow]) -> Result<()> {
    write_lines(path, STABILITY_HEADER, rows.iter().map(stability_line))
}

pub fn write_curves(path: &Path, points: &[CurvePoint]) -> Result<()> {
    write_lines(
        path,
        CURVES_HEADER,
        points.iter().map(|p| {
            format!(
                "{:.2},{},{},{},{},{},{}",
                p.t, p.fitted[0], p.fitted[1], p.fitted[2], p.exact[0], p.exact[1], p.exact[2]
            )
        }),
    )
}

/// Writes `fit_`, `errors_`, `curves_` and, when a sweep ran,
/// `stability_<segment>.csv` into `dir`. Returns the paths written.
pub fn render_reports(dir: &Path, results: &SegmentResults, truth: &RateConstants) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SsmError::io(dir, e))?;
    let name = &results.experiment.segment;
    let mut written = Vec::new();

    let path = dir.join(format!("fit_{name}.csv"));
    write_fit(&path, &results.experiment.fit, Some(truth))?;
    written.push(path);

    let path = dir.join(format!("errors_{name}.csv"));
    write_errors(&path, &results.experiment.grid)?;
    written.push(path);

    let path = dir.join(format!("curves_{name}.csv"));
    write_curves(&path, &results.curves)?;
    written.push(path);

    if let Some(rows) = &results.stability {
        let path = dir.join(format!("stability_{name}.csv"));
        write_stability(&path, rows)?;
        written.push(path);
    }
    Ok(written)
}
