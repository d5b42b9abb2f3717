//! Trace and summary tables.

use std::path::Path;

use finsler_core::descent::DescentState;
use finsler_core::Vec2;

use crate::error::CliError;

pub const TRACE_COLUMNS: [&str; 8] = [
    "k",
    "energy",
    "tau",
    "grad_norm_h1",
    "finsler_obj",
    "angle_cos",
    "distortion_rigid",
    "distortion_simil",
];

/// Shortest round-trip text, in exponent form for very small or large values.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && (a < 1e-4 || a >= 1e15) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

pub fn write_trace(path: &Path, trace: &[DescentState]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TRACE_COLUMNS).map_err(|e| csv_error(path, e))?;
    for s in trace {
        w.write_record([
            s.k.to_string(),
            opt(s.energy),
            opt(s.tau),
            opt(s.grad_norm_h1),
            opt(s.finsler_obj),
            opt(s.angle_cos),
            num(s.distortion_rigid),
            num(s.distortion_simil),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Node `i` of the initial curve against node `i` of the final one.
pub fn write_correspondence(path: &Path, initial: &[Vec2], last: &[Vec2]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["i", "x0", "y0", "x", "y"]).map_err(|e| csv_error(path, e))?;
    for (i, (a, b)) in initial.iter().zip(last).enumerate() {
        w.write_record([i.to_string(), num(a.x), num(a.y), num(b.x), num(b.y)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummaryRow {
    pub rho: f64,
    pub lambda: f64,
    pub distortion_rigid: f64,
    pub distortion_simil: f64,
    pub best_fit_scale: f64,
}

pub fn write_flow_summary(path: &Path, rows: &[FlowSummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["rho", "lambda", "distortion_rigid", "distortion_simil", "best_fit_scale"])
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            num(r.rho),
            num(r.lambda),
            num(r.distortion_rigid),
            num(r.distortion_simil),
            num(r.best_fit_scale),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
