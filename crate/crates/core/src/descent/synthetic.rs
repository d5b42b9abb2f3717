use serde::{Deserialize, Serialize};

use super::{direction_from_gradient, rigidity_diagnostics_seeded, DescentMode, DescentState, DirectionParams};
use crate::curve::{DiscreteCurve, TangentField};
use crate::error::{FinslerError, Result};
use crate::vec2::Vec2;

/// `F_i = -(5 x_i, 1000 (y_i - 1/2)²)`.
pub fn synthetic_field(curve: &DiscreteCurve) -> TangentField {
    TangentField(
        curve
            .nodes()
            .iter()
            .map(|p| {
                let u = p.y - 0.5;
                -Vec2::new(5.0 * p.x, 1000.0 * u * u)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFlowConfig {
    /// `FinslerRigid` / `FinslerSimilarity` project `F`; any other mode
    /// follows `F` itself.
    pub mode: DescentMode,
    pub rho: f64,
    pub lambda: f64,
    pub tau: f64,
    pub steps: usize,
    pub socp_tol: f64,
    pub socp_max_iter: u32,
    /// Seed of the pair sampler in the rigidity diagnostics.
    pub seed: u64,
}

impl Default for SyntheticFlowConfig {
    fn default() -> Self {
        Self {
            mode: DescentMode::FinslerRigid,
            rho: 0.5,
            lambda: 0.0,
            tau: 0.0005,
            steps: 20,
            socp_tol: crate::socp::DEFAULT_TOL,
            socp_max_iter: crate::socp::DEFAULT_MAX_ITER,
            seed: super::PAIR_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticFlowResult {
    /// `Γ_0, …, Γ_steps`.
    pub curves: Vec<DiscreteCurve>,
    pub trace: Vec<DescentState>,
}

/// `Γ_{k+1} = Γ_k - τ Φ_k` with `Φ_k` the direction obtained by putting
/// `F(Γ_k)` in place of the `h¹` gradient.
///
/// Aborts with the curve error if an iterate has a degenerate edge.
pub fn synthetic_flow(initial: &DiscreteCurve, config: &SyntheticFlowConfig) -> Result<SyntheticFlowResult> {
    if !(config.tau > 0.0 && config.tau.is_finite()) {
        return Err(FinslerError::InvalidParameter(format!("step must be positive, got {}", config.tau)));
    }
    let finsler = config.mode.variant(config.lambda).is_some();
    if finsler && !(config.rho > 0.0 && config.rho < 1.0) {
        return Err(FinslerError::InvalidParameter(format!("rho must lie in (0, 1), got {}", config.rho)));
    }
    let mut curves = vec![initial.clone()];
    let mut trace = vec![DescentState {
        k: 0,
        energy: None,
        tau: None,
        grad_norm_h1: None,
        finsler_obj: None,
        angle_cos: None,
        distortion_rigid: 0.0,
        distortion_simil: 0.0,
        best_fit_scale: 1.0,
        wolfe: None,
    }];
    let mut curve = initial.clone();
    for k in 1..=config.steps {
        let metrics = curve.metrics();
        let f = synthetic_field(&curve);
        trace[k - 1].grad_norm_h1 = Some(metrics.h1_norm(&f));
        let (phi, obj) = if finsler {
            let params = DirectionParams {
                mode: config.mode,
                rho: config.rho,
                lambda: config.lambda,
                socp_tol: config.socp_tol,
                socp_max_iter: config.socp_max_iter,
                // F is not a gradient, so there is no descent to protect.
                angle_guard: false,
            };
            let d = direction_from_gradient(&curve, &metrics, &f, &f, &params)?;
            (d.field, d.finsler_obj)
        } else {
            (f.clone(), None)
        };
        let angle = {
            let a = metrics.h1_norm(&phi);
            let b = metrics.h1_norm(&f);
            if a > 0.0 && b > 0.0 {
                crate::curve::inner_h1(&metrics, &phi, &f) / (a * b)
            } else {
                0.0
            }
        };
        curve = curve.displaced(&phi, -config.tau)?;
        let diag = rigidity_diagnostics_seeded(initial, &curve, config.seed)?;
        trace.push(DescentState {
            k,
            energy: None,
            tau: Some(config.tau),
            grad_norm_h1: None,
            finsler_obj: obj,
            angle_cos: Some(angle),
            distortion_rigid: diag.distortion_rigid,
            distortion_simil: diag.distortion_similarity,
            best_fit_scale: diag.best_fit_scale,
            wolfe: None,
        });
        curves.push(curve.clone());
    }
    Ok(SyntheticFlowResult { curves, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn field_values() {
        let c = DiscreteCurve::from_points(&[[0.0, 0.5], [1.0, 0.5], [0.0, 0.6]]).unwrap();
        let f = synthetic_field(&c);
        assert_eq!(f[0], Vec2::new(-0.0, -0.0));
        assert_eq!(f[1], Vec2::new(-5.0, -0.0));
        assert_abs_diff_eq!(f[2].x, 0.0);
        assert_abs_diff_eq!(f[2].y, -10.0, epsilon = 1e-12);
    }

    #[test]
    fn free_flow_is_explicit_euler() {
        let c = DiscreteCurve::from_points(&[[0.0, 0.4], [0.2, 0.45], [0.1, 0.6]]).unwrap();
        let cfg = SyntheticFlowConfig { mode: DescentMode::SyntheticF, steps: 2, ..Default::default() };
        let res = synthetic_flow(&c, &cfg).unwrap();
        let mut p = c.node(1);
        for _ in 0..2 {
            let u = p.y - 0.5;
            p = p + Vec2::new(5.0 * p.x, 1000.0 * u * u) * 0.0005;
        }
        assert_abs_diff_eq!((res.curves[2].node(1) - p).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(res.trace.len(), 3);
    }
}
