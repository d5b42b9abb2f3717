//! Descent loop `Γ_{k+1} = Γ_k - τ_k Φ_k`, where `Φ_k` is the Finsler
//! direction (or a Sobolev / `L²` gradient for comparison), with Wolfe steps.

mod diagnostics;
mod synthetic;
mod wolfe;

pub use diagnostics::{rigidity_diagnostics, rigidity_diagnostics_seeded, RigidityDiagnostics, PAIR_SEED};
pub use synthetic::{synthetic_field, synthetic_flow, SyntheticFlowConfig, SyntheticFlowResult};
pub use wolfe::{wolfe_search, LineSearchOutcome, StepBounds, WolfeParams};

use serde::{Deserialize, Serialize};

use crate::curve::{dot, inner_h1, resample_arclength, CurveMetrics, DiscreteCurve, TangentField};
use crate::energy::MatchingEnergy;
use crate::error::{FinslerError, Result};
use crate::socp::{solve_finsler_with, ConeStatus, FinslerSolution, FinslerVariant, KktResiduals, ProgramOptions};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentMode {
    FinslerRigid,
    FinslerSimilarity,
    SobolevH1,
    L2,
    /// The synthetic field itself; only meaningful for [`synthetic_flow`].
    SyntheticF,
}

impl DescentMode {
    pub fn variant(&self, lambda: f64) -> Option<FinslerVariant> {
        match self {
            DescentMode::FinslerRigid => Some(FinslerVariant::Rigid),
            DescentMode::FinslerSimilarity => Some(FinslerVariant::Similarity { lambda }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub mode: DescentMode,
    pub rho: f64,
    pub lambda: f64,
    pub wolfe: WolfeParams,
    pub tau_init: f64,
    pub bounds: StepBounds,
    pub max_iters: usize,
    /// Stop once `‖∇_{h¹}E‖ ≤ stop_grad_rel · ‖∇_{h¹}E(Γ_0)‖`.
    pub stop_grad_rel: f64,
    /// Stop once the relative energy decrease of a step is below this.
    pub stop_energy_rel: f64,
    /// Arc-length resampling period; `None` keeps the parametrisation fixed.
    pub resample_every: Option<usize>,
    pub socp_tol: f64,
    pub socp_max_iter: u32,
    /// Seed of the pair sampler in the rigidity diagnostics.
    pub seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            mode: DescentMode::FinslerRigid,
            rho: 0.8,
            lambda: 0.0,
            wolfe: WolfeParams::default(),
            tau_init: 1.0,
            bounds: StepBounds::default(),
            max_iters: 1000,
            stop_grad_rel: 1e-6,
            stop_energy_rel: 1e-10,
            resample_every: None,
            socp_tol: crate::socp::DEFAULT_TOL,
            socp_max_iter: crate::socp::DEFAULT_MAX_ITER,
            seed: PAIR_SEED,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        WolfeParams::new(self.wolfe.alpha, self.wolfe.beta)?;
        let bad = |m: String| Err(FinslerError::InvalidParameter(m));
        if self.mode.variant(self.lambda).is_some() && !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if !(self.tau_init > 0.0 && self.tau_init.is_finite()) {
            return bad(format!("initial step must be positive, got {}", self.tau_init));
        }
        if self.resample_every == Some(0) {
            return bad("resampling period must be positive".into());
        }
        Ok(())
    }
}

/// One row of the descent trace, describing iterate `Γ_k`.
///
/// `tau`, `finsler_obj`, `angle_cos` and `wolfe` describe the step that
/// produced `Γ_k` and are empty for `k = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentState {
    pub k: usize,
    pub energy: Option<f64>,
    pub tau: Option<f64>,
    pub grad_norm_h1: Option<f64>,
    pub finsler_obj: Option<f64>,
    pub angle_cos: Option<f64>,
    pub distortion_rigid: f64,
    pub distortion_simil: f64,
    pub best_fit_scale: f64,
    pub wolfe: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    CriticalPoint,
    EnergyStalled,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub curve: DiscreteCurve,
    pub trace: Vec<DescentState>,
    pub stop: StopReason,
}

/// A descent direction `Φ`; the step is `Γ - τ Φ`.
#[derive(Debug, Clone)]
pub struct Direction {
    pub field: TangentField,
    pub finsler_obj: Option<f64>,
    pub kkt: Option<KktResiduals>,
    /// The angle cone was imposed.
    pub guarded: bool,
}

/// Settings for [`direction_from_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionParams {
    pub mode: DescentMode,
    pub rho: f64,
    pub lambda: f64,
    pub socp_tol: f64,
    pub socp_max_iter: u32,
    /// If the Finsler minimiser violates `cos(Φ, g) ≥ 1 - ρ` in `h¹`, solve
    /// again with that condition imposed as a cone.
    pub angle_guard: bool,
}

impl DirectionParams {
    pub fn from_config(config: &DescentConfig) -> Self {
        Self {
            mode: config.mode,
            rho: config.rho,
            lambda: config.lambda,
            socp_tol: config.socp_tol,
            socp_max_iter: config.socp_max_iter,
            angle_guard: true,
        }
    }
}

fn certified(sol: FinslerSolution) -> Result<FinslerSolution> {
    if sol.status() != ConeStatus::Optimal {
        return Err(FinslerError::Solver(format!(
            "cone solve stopped after {} iterations ({}) with KKT residuals {:?}",
            sol.cone.iterations, sol.cone.backend_status, sol.cone.kkt
        )));
    }
    Ok(sol)
}

/// Direction from the canonical and `h¹` gradients (or any field standing
/// in for them).
///
/// With the angle guard on, a minimiser failing the angle condition is
/// replaced by the minimiser under the angle cone. If that program is
/// infeasible the first minimiser is kept when it still descends, and
/// [`FinslerError::NotDescent`] is returned otherwise.
pub fn direction_from_gradient(
    curve: &DiscreteCurve,
    metrics: &CurveMetrics,
    grad_canonical: &[Vec2],
    grad_h1: &[Vec2],
    params: &DirectionParams,
) -> Result<Direction> {
    let rho = params.rho;
    match params.mode {
        DescentMode::FinslerRigid | DescentMode::FinslerSimilarity => {
            let variant = params.mode.variant(params.lambda).expect("finsler mode");
            let run = |options: ProgramOptions| {
                solve_finsler_with(
                    curve,
                    metrics,
                    grad_h1,
                    rho,
                    variant,
                    options,
                    params.socp_tol,
                    params.socp_max_iter,
                )
            };
            let mut sol = match run(ProgramOptions::default()) {
                Err(FinslerError::ZeroGradient) => {
                    return Err(FinslerError::CriticalPoint { norm: metrics.h1_norm(grad_h1) })
                }
                other => certified(other?)?,
            };
            let mut guarded = false;
            if params.angle_guard && h1_cos(metrics, &sol.field, grad_h1) < 1.0 - rho {
                match run(ProgramOptions { angle_cone: true }) {
                    Ok(s) => {
                        sol = certified(s)?;
                        guarded = true;
                    }
                    Err(FinslerError::Infeasible) => {
                        let slope = -dot(grad_canonical, &sol.field);
                        if slope >= 0.0 {
                            return Err(FinslerError::NotDescent { slope });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(Direction {
                finsler_obj: Some(sol.objective),
                kkt: Some(sol.cone.kkt),
                field: sol.field,
                guarded,
            })
        }
        DescentMode::SobolevH1 => Ok(Direction {
            field: TangentField(grad_h1.to_vec()),
            finsler_obj: None,
            kkt: None,
            guarded: false,
        }),
        DescentMode::L2 => {
            let chol = metrics.mass.cholesky().ok_or_else(|| {
                FinslerError::Solver("mass matrix is not positive definite".into())
            })?;
            Ok(Direction {
                field: TangentField(chol.solve_field(grad_canonical)),
                finsler_obj: None,
                kkt: None,
                guarded: false,
            })
        }
        DescentMode::SyntheticF => Err(FinslerError::InvalidParameter(
            "the synthetic mode has no energy gradient; use synthetic_flow".into(),
        )),
    }
}

/// Finsler direction of the matching energy at `curve`.
pub fn finsler_gradient(curve: &DiscreteCurve, energy: &MatchingEnergy, config: &DescentConfig) -> Result<TangentField> {
    let metrics = curve.metrics();
    let report = energy.report(curve, &metrics);
    let params = DirectionParams::from_config(config);
    let d = direction_from_gradient(curve, &metrics, &report.grad_canonical, &report.grad_h1, &params)?;
    Ok(d.field)
}

fn h1_cos(metrics: &CurveMetrics, a: &[Vec2], b: &[Vec2]) -> f64 {
    let na = metrics.h1_norm(a);
    let nb = metrics.h1_norm(b);
    if na > 0.0 && nb > 0.0 {
        inner_h1(metrics, a, b) / (na * nb)
    } else {
        0.0
    }
}

/// Runs the descent without observing intermediate curves.
pub fn descend(initial: &DiscreteCurve, energy: &MatchingEnergy, config: &DescentConfig) -> Result<DescentResult> {
    descend_with(initial, energy, config, |_, _| {})
}

/// Runs the descent; `observer` sees every iterate, starting with `Γ_0`.
///
/// Every accepted step satisfies the sufficient-decrease condition, so the
/// energy is strictly decreasing unless resampling is switched on.
pub fn descend_with<O>(
    initial: &DiscreteCurve,
    energy: &MatchingEnergy,
    config: &DescentConfig,
    mut observer: O,
) -> Result<DescentResult>
where
    O: FnMut(&DescentState, &DiscreteCurve),
{
    config.validate()?;
    if config.mode == DescentMode::SyntheticF {
        return Err(FinslerError::InvalidParameter(
            "the synthetic mode has no energy gradient; use synthetic_flow".into(),
        ));
    }
    let reference = initial.clone();
    let mut curve = initial.clone();
    let mut metrics = curve.metrics();
    let mut value = energy.value(&curve);
    let mut grad = energy.gradient(&curve);
    let mut grad_h1 = metrics.solve_metric(&grad);
    let mut gnorm = metrics.h1_norm(&grad_h1);
    let grad_floor = config.stop_grad_rel * gnorm;
    let mut tau_guess = config.tau_init;
    let params = DirectionParams::from_config(config);

    let mut trace = Vec::new();
    let diag = rigidity_diagnostics_seeded(&reference, &curve, config.seed)?;
    let state0 = DescentState {
        k: 0,
        energy: Some(value),
        tau: None,
        grad_norm_h1: Some(gnorm),
        finsler_obj: None,
        angle_cos: None,
        distortion_rigid: diag.distortion_rigid,
        distortion_simil: diag.distortion_similarity,
        best_fit_scale: diag.best_fit_scale,
        wolfe: None,
    };
    observer(&state0, &curve);
    trace.push(state0);

    let mut stop = StopReason::MaxIters;
    for k in 1..=config.max_iters {
        if gnorm <= grad_floor {
            stop = StopReason::CriticalPoint;
            break;
        }
        let dir = match direction_from_gradient(&curve, &metrics, &grad, &grad_h1, &params) {
            Err(FinslerError::CriticalPoint { .. }) => {
                stop = StopReason::CriticalPoint;
                break;
            }
            other => other?,
        };
        let v: Vec<Vec2> = dir.field.iter().map(|&p| -p).collect();
        let slope0 = dot(&grad, &v);

        // Cache the last trial so the accepted point is not re-evaluated.
        let mut last: Option<(f64, DiscreteCurve, f64, Vec<Vec2>)> = None;
        let outcome = wolfe_search(value, slope0, tau_guess, config.wolfe, config.bounds, |tau| {
            let trial = curve.displaced(&v, tau).ok()?;
            let f = energy.value(&trial);
            let g = energy.gradient(&trial);
            let s = dot(&g, &v);
            last = Some((tau, trial, f, g));
            Some((f, s))
        })?;
        let (next, next_value, next_grad) = match last {
            Some((t, c, f, g)) if t == outcome.tau => (c, f, g),
            _ => {
                let c = curve.displaced(&v, outcome.tau)?;
                let f = energy.value(&c);
                let g = energy.gradient(&c);
                (c, f, g)
            }
        };
        let decrease = value - next_value;
        let angle = h1_cos(&metrics, &dir.field, &grad_h1);

        curve = next;
        value = next_value;
        grad = next_grad;
        tau_guess = outcome.tau;
        if let Some(period) = config.resample_every {
            if k % period == 0 {
                curve = resample_arclength(curve.nodes(), curve.len())?;
                value = energy.value(&curve);
                grad = energy.gradient(&curve);
            }
        }
        metrics = curve.metrics();
        grad_h1 = metrics.solve_metric(&grad);
        gnorm = metrics.h1_norm(&grad_h1);

        let diag = rigidity_diagnostics_seeded(&reference, &curve, config.seed)?;
        let state = DescentState {
            k,
            energy: Some(value),
            tau: Some(outcome.tau),
            grad_norm_h1: Some(gnorm),
            finsler_obj: dir.finsler_obj,
            angle_cos: Some(angle),
            distortion_rigid: diag.distortion_rigid,
            distortion_simil: diag.distortion_similarity,
            best_fit_scale: diag.best_fit_scale,
            wolfe: Some(outcome.wolfe),
        };
        observer(&state, &curve);
        trace.push(state);

        let scale = (value + decrease).abs().max(f64::MIN_POSITIVE);
        if decrease / scale < config.stop_energy_rel {
            stop = StopReason::EnergyStalled;
            break;
        }
        if k == config.max_iters {
            stop = StopReason::MaxIters;
        }
    }
    Ok(DescentResult { curve, trace, stop })
}
