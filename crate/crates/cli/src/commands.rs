//! The `match`, `flow` and `gradient` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use finsler_core::descent::{
    descend_with, direction_from_gradient, synthetic_flow, DescentMode, DirectionParams, StopReason,
    SyntheticFlowConfig,
};
use finsler_core::energy::MatchingEnergy;
use finsler_core::penalty::RigidityOperators;
use finsler_core::socp::{build_finsler_program, KktResiduals};
use finsler_core::{DiscreteCurve, FinslerError, Vec2};
use serde::Serialize;

use crate::curve_file::{polygon_area, resample, CurveFile, Normalization};
use crate::error::CliError;
use crate::manifest::{Command, RunManifest};
use crate::svg::{render_svg, CurveStyle};
use crate::trace::{write_correspondence, write_flow_summary, write_trace, FlowSummaryRow};

pub fn run(m: &RunManifest) -> Result<(), CliError> {
    m.validate()?;
    match m.command {
        Command::Match => cmd_match(m).map(|_| ()),
        Command::Flow => cmd_flow(m),
        Command::Gradient => cmd_gradient(m),
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn frame_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("{k:05}.svg"))
}

/// Source and target resampled to `n` nodes in working coordinates.
pub struct PreparedPair {
    pub source: DiscreteCurve,
    pub target: DiscreteCurve,
    pub normalization: Normalization,
    /// The source point order was reversed to match the target.
    pub flipped: bool,
}

pub fn prepare_pair(m: &RunManifest) -> Result<PreparedPair, CliError> {
    let target_path = m.target.as_ref().ok_or_else(|| CliError::input("a target curve is required"))?;
    let mut src = CurveFile::load(&m.source)?.vertices();
    let tgt = CurveFile::load(target_path)?.vertices();
    let flipped = polygon_area(&src).signum() != polygon_area(&tgt).signum();
    if flipped {
        src.reverse();
    }
    let normalization = if m.normalize { Normalization::fit(&[&src, &tgt])? } else { Normalization::IDENTITY };
    Ok(PreparedPair {
        source: resample(&normalization.apply(&src), m.n)?,
        target: resample(&normalization.apply(&tgt), m.n)?,
        normalization,
        flipped,
    })
}

#[derive(Debug, Clone)]
pub struct MatchSummary {
    pub iterations: usize,
    pub stop: StopReason,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub flipped: bool,
}

pub fn cmd_match(m: &RunManifest) -> Result<MatchSummary, CliError> {
    m.validate()?;
    let pair = prepare_pair(m)?;
    if pair.flipped {
        eprintln!("source orientation disagrees with the target; reversing the source");
    }
    let frames = m.out.join("frames");
    create_dir(&frames)?;
    write_file(&m.out.join("manifest.json"), &m.to_json())?;

    let norm = pair.normalization;
    let target_out = norm.undo(pair.target.nodes());
    let initial_out = norm.undo(pair.source.nodes());
    let energy = MatchingEnergy::new(pair.target.clone(), m.kernel);
    let mut io_error: Option<CliError> = None;
    let mut last_frame = None;
    let result = descend_with(&pair.source, &energy, &m.descent, |state, curve| {
        if state.k % m.frame_every != 0 || io_error.is_some() {
            return;
        }
        let current = norm.undo(curve.nodes());
        let svg = render_svg(&[
            (&target_out, CurveStyle::Target),
            (&initial_out, CurveStyle::Initial),
            (&current, CurveStyle::Current),
        ]);
        if let Err(e) = write_file(&frame_path(&frames, state.k), &svg) {
            io_error = Some(e);
        }
        last_frame = Some(state.k);
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let final_out = norm.undo(result.curve.nodes());
    let last_k = result.trace.last().map_or(0, |s| s.k);
    if last_frame != Some(last_k) {
        let svg = render_svg(&[
            (&target_out, CurveStyle::Target),
            (&initial_out, CurveStyle::Initial),
            (&final_out, CurveStyle::Current),
        ]);
        write_file(&frame_path(&frames, last_k), &svg)?;
    }
    write_trace(&m.out.join("trace.csv"), &result.trace)?;
    write_correspondence(&m.out.join("correspondence.csv"), &initial_out, &final_out)?;
    CurveFile::from_nodes(Some("final".into()), &final_out).save(&m.out.join("final.json"))?;

    let summary = MatchSummary {
        iterations: last_k,
        stop: result.stop,
        initial_energy: result.trace[0].energy.unwrap_or(f64::NAN),
        final_energy: result.trace.last().and_then(|s| s.energy).unwrap_or(f64::NAN),
        flipped: pair.flipped,
    };
    println!(
        "{} iterations ({:?}), energy {:e} -> {:e}",
        summary.iterations, summary.stop, summary.initial_energy, summary.final_energy
    );
    Ok(summary)
}

pub fn cmd_flow(m: &RunManifest) -> Result<(), CliError> {
    m.validate()?;
    let vertices = CurveFile::load(&m.source)?.vertices();
    let norm = if m.normalize { Normalization::fit(&[&vertices])? } else { Normalization::IDENTITY };
    let initial = resample(&norm.apply(&vertices), m.n)?;
    let initial_out = norm.undo(initial.nodes());
    create_dir(&m.out)?;
    write_file(&m.out.join("manifest.json"), &m.to_json())?;

    let rhos = if m.flow.rhos.is_empty() { vec![m.descent.rho] } else { m.flow.rhos.clone() };
    let lambdas = if m.flow.lambdas.is_empty() { vec![m.descent.lambda] } else { m.flow.lambdas.clone() };
    let single = rhos.len() == 1 && lambdas.len() == 1;
    let mut rows = Vec::new();
    for &rho in &rhos {
        for &lambda in &lambdas {
            let dir = if single { m.out.clone() } else { m.out.join(format!("rho{rho}_lambda{lambda}")) };
            let frames = dir.join("frames");
            create_dir(&frames)?;
            let config = SyntheticFlowConfig {
                mode: m.descent.mode,
                rho,
                lambda,
                tau: m.flow.tau,
                steps: m.flow.steps,
                socp_tol: m.descent.socp_tol,
                socp_max_iter: m.descent.socp_max_iter,
                seed: m.seed,
            };
            let res = synthetic_flow(&initial, &config)?;
            for (k, curve) in res.curves.iter().enumerate() {
                if k % m.frame_every == 0 || k + 1 == res.curves.len() {
                    let current = norm.undo(curve.nodes());
                    let svg = render_svg(&[(&initial_out, CurveStyle::Initial), (&current, CurveStyle::Current)]);
                    write_file(&frame_path(&frames, k), &svg)?;
                }
            }
            write_trace(&dir.join("trace.csv"), &res.trace)?;
            let last = res.trace.last().expect("trace has the initial row");
            println!(
                "rho {rho} lambda {lambda}: distortion {:.6e}, best-fit scale {:.6}",
                last.distortion_rigid, last.best_fit_scale
            );
            rows.push(FlowSummaryRow {
                rho,
                lambda,
                distortion_rigid: last.distortion_rigid,
                distortion_simil: last.distortion_simil,
                best_fit_scale: last.best_fit_scale,
            });
        }
    }
    write_flow_summary(&m.out.join("distortion_vs_rho.csv"), &rows)
}

#[derive(Debug, Serialize)]
struct GapReport {
    lhs: f64,
    rhs: f64,
    is_member: bool,
}

#[derive(Debug, Serialize)]
struct FinslerReport {
    field: Vec<[f64; 2]>,
    objective: Option<f64>,
    penalty_v: f64,
    penalty_tvk: f64,
    l1_l: f64,
    max_abs_l: f64,
    deviation_gap: GapReport,
    kkt: Option<KktResiduals>,
    angle_guard_used: bool,
}

#[derive(Debug, Serialize)]
struct GradientReport {
    n: usize,
    normalization: Normalization,
    flipped: bool,
    mode: DescentMode,
    rho: f64,
    lambda: f64,
    energy: f64,
    grad_norm_h1: f64,
    grad_h1: Vec<[f64; 2]>,
    /// `null` when the gradient vanishes.
    finsler: Option<FinslerReport>,
}

fn pairs(v: &[Vec2]) -> Vec<[f64; 2]> {
    v.iter().map(|p| [p.x, p.y]).collect()
}

/// Writes `gradient.json` for the source curve; fields are in working
/// (normalised) coordinates.
pub fn cmd_gradient(m: &RunManifest) -> Result<(), CliError> {
    m.validate()?;
    let pair = prepare_pair(m)?;
    create_dir(&m.out)?;
    write_file(&m.out.join("manifest.json"), &m.to_json())?;
    let curve = &pair.source;
    let metrics = curve.metrics();
    let energy = MatchingEnergy::new(pair.target.clone(), m.kernel);
    let report = energy.report(curve, &metrics);
    let params = DirectionParams::from_config(&m.descent);

    if m.dump_program {
        if let Some(variant) = m.descent.mode.variant(m.descent.lambda) {
            match build_finsler_program(curve, &metrics, &report.grad_h1, m.descent.rho, variant) {
                Ok(fp) => write_file(&m.out.join("program.txt"), &fp.program.to_text())?,
                Err(FinslerError::ZeroGradient) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    let finsler = match direction_from_gradient(curve, &metrics, &report.grad_canonical, &report.grad_h1, &params) {
        Ok(d) => {
            let ops = RigidityOperators::new(curve);
            let l = ops.op_l(&d.field)?;
            let gap = ops.deviation_gap(&metrics, &d.field, &report.grad_h1, m.descent.rho)?;
            Some(FinslerReport {
                field: pairs(&d.field),
                objective: d.finsler_obj,
                penalty_v: ops.penalty_v(&d.field)?,
                penalty_tvk: ops.penalty_tvk(&d.field)?,
                l1_l: ops.l1_l(&d.field)?,
                max_abs_l: l.iter().fold(0.0, |a, x| a.max(x.abs())),
                deviation_gap: GapReport { lhs: gap.lhs, rhs: gap.rhs, is_member: gap.is_member() },
                kkt: d.kkt,
                angle_guard_used: d.guarded,
            })
        }
        Err(FinslerError::CriticalPoint { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let out = GradientReport {
        n: m.n,
        normalization: pair.normalization,
        flipped: pair.flipped,
        mode: m.descent.mode,
        rho: m.descent.rho,
        lambda: m.descent.lambda,
        energy: report.value,
        grad_norm_h1: metrics.h1_norm(&report.grad_h1),
        grad_h1: pairs(&report.grad_h1),
        finsler,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("report serializes");
    text.push('\n');
    write_file(&m.out.join("gradient.json"), &text)
}
