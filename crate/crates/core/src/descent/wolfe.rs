use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};

/// Constants of the sufficient-decrease (`alpha`) and curvature (`beta`)
/// conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WolfeParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            beta: 0.9,
        }
    }
}

impl WolfeParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha < beta && beta < 1.0) {
            return Err(FinslerError::InvalidParameter(format!(
                "Wolfe constants need 0 < alpha < beta < 1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// Step bracket and bisection budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBounds {
    pub tau_min: f64,
    pub tau_max: f64,
    pub max_bisections: usize,
}

impl Default for StepBounds {
    fn default() -> Self {
        Self {
            tau_min: 1e-16,
            tau_max: 1e8,
            max_bisections: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub tau: f64,
    pub value: f64,
    /// `false` when only sufficient decrease holds (fallback).
    pub wolfe: bool,
    pub trials: usize,
}

/// Weak Wolfe step by bracketing and bisection.
///
/// `eval(τ)` returns the energy at the trial point and the slope
/// `⟨∇E(Γ + τ v), v⟩`, or `None` if the trial point is not admissible (it is
/// then treated like a failed decrease test). If no step satisfies both
/// conditions within the budget, the largest step with sufficient decrease is
/// returned with `wolfe = false`.
pub fn wolfe_search<F>(
    f0: f64,
    slope0: f64,
    tau_init: f64,
    wolfe: WolfeParams,
    bounds: StepBounds,
    mut eval: F,
) -> Result<LineSearchOutcome>
where
    F: FnMut(f64) -> Option<(f64, f64)>,
{
    if !(slope0 < 0.0) {
        return Err(FinslerError::NotDescent { slope: slope0 });
    }
    if !(tau_init > 0.0) {
        return Err(FinslerError::InvalidParameter(format!(
            "initial step must be positive, got {tau_init}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut tau = tau_init.clamp(bounds.tau_min, bounds.tau_max);
    let mut best: Option<(f64, f64)> = None;
    let mut trials = 0;
    let mut bisections = 0;
    loop {
        trials += 1;
        match eval(tau) {
            Some((f, s)) if f.is_finite() && f <= f0 + wolfe.alpha * tau * slope0 => {
                if best.map_or(true, |(t, _)| tau > t) {
                    best = Some((tau, f));
                }
                if s >= wolfe.beta * slope0 {
                    return Ok(LineSearchOutcome { tau, value: f, wolfe: true, trials });
                }
                lo = tau;
            }
            _ => hi = tau,
        }
        if hi.is_finite() {
            bisections += 1;
            if bisections > bounds.max_bisections {
                break;
            }
            tau = 0.5 * (lo + hi);
        } else {
            if tau >= bounds.tau_max {
                break;
            }
            tau = (2.0 * tau).min(bounds.tau_max);
        }
        if tau < bounds.tau_min {
            break;
        }
    }
    match best {
        Some((tau, value)) => Ok(LineSearchOutcome { tau, value, wolfe: false, trials }),
        None => Err(FinslerError::LineSearch(format!(
            "no step in [{:.3e}, {:.3e}] decreases the energy after {trials} trials",
            bounds.tau_min, bounds.tau_max
        ))),
    }
}
