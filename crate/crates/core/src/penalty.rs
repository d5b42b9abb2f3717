//! Discrete rigidity and similarity operators.
//!
//! For a P1 field `Φ` on a P1 curve `Γ`, the arc-length derivative
//! `dΦ/dΓ` is P0 with value `Δ⁺Φ_i / |Δ⁺Γ_i|` on edge `i`. Its tangential
//! part `L` measures stretching, its normal part `H` is constant on a rigid
//! motion; penalising the jumps of `H` (or of the pair `K = (L, H)` for
//! similarities) favours piecewise-rigid (piecewise-similar) deformations.

use serde::{Deserialize, Serialize};

use crate::curve::{check_len, CurveMetrics, DiscreteCurve, EdgeFrame};
use crate::error::Result;
use crate::vec2::Vec2;

/// Relative tolerance for constraint membership.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// How the P1 field is reduced to one value per edge before projecting on
/// the edge normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionRule {
    /// Average of the two end nodes (value at the edge midpoint).
    #[default]
    Midpoint,
    /// Value at the first node of the edge.
    LeftNode,
}

/// Norm used on the jumps of the 2-vector `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpNorm {
    #[default]
    Euclidean,
    L1,
}

/// Operators `L`, `H`, `Π` and `K` for one curve.
#[derive(Debug, Clone)]
pub struct RigidityOperators {
    frame: EdgeFrame,
    edge_len: Vec<f64>,
    rule: ProjectionRule,
}

impl RigidityOperators {
    pub fn new(curve: &DiscreteCurve) -> Self {
        Self::with_rule(curve, ProjectionRule::Midpoint)
    }

    pub fn with_rule(curve: &DiscreteCurve, rule: ProjectionRule) -> Self {
        let frame = curve.edge_frame();
        let n = curve.len() as f64;
        let edge_len = frame.speed.iter().map(|s| s / n).collect();
        Self {
            frame,
            edge_len,
            rule,
        }
    }

    pub fn len(&self) -> usize {
        self.frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame.is_empty()
    }

    pub fn frame(&self) -> &EdgeFrame {
        &self.frame
    }

    pub fn rule(&self) -> ProjectionRule {
        self.rule
    }

    /// Edge lengths `|Δ⁺Γ_i| / n`, the P0 weights of the `L¹(Γ)` integral.
    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_len
    }

    /// `dΦ/dΓ` on edge `i`, i.e. `(Φ_{i+1} - Φ_i) / |Γ_{i+1} - Γ_i|`.
    #[inline]
    fn derivative(&self, phi: &[Vec2], i: usize) -> Vec2 {
        let n = phi.len();
        (phi[(i + 1) % n] - phi[i]) / self.edge_len[i]
    }

    /// Tangential stretch `L_i = ⟨dΦ/dΓ_i, t_i⟩`.
    pub fn op_l(&self, phi: &[Vec2]) -> Result<Vec<f64>> {
        check_len(self.len(), phi.len())?;
        Ok((0..self.len())
            .map(|i| self.derivative(phi, i).dot(self.frame.tangent[i]))
            .collect())
    }

    /// Normal derivative `H_i = ⟨dΦ/dΓ_i, n_i⟩`.
    pub fn op_hn(&self, phi: &[Vec2]) -> Result<Vec<f64>> {
        check_len(self.len(), phi.len())?;
        Ok((0..self.len())
            .map(|i| self.derivative(phi, i).dot(self.frame.normal[i]))
            .collect())
    }

    /// Linear coefficients of `L_i` on `(Φ_i, Φ_{i+1})`.
    pub(crate) fn l_coeffs(&self, i: usize) -> (Vec2, Vec2) {
        let t = self.frame.tangent[i] / self.edge_len[i];
        (-t, t)
    }

    /// Linear coefficients of `H_i` on `(Φ_i, Φ_{i+1})`.
    pub(crate) fn h_coeffs(&self, i: usize) -> (Vec2, Vec2) {
        let nv = self.frame.normal[i] / self.edge_len[i];
        (-nv, nv)
    }

    /// Linear coefficients of the scalar normal component `p_i` on `(Φ_i, Φ_{i+1})`.
    pub(crate) fn pi_coeffs(&self, i: usize) -> (Vec2, Vec2) {
        let nv = self.frame.normal[i];
        match self.rule {
            ProjectionRule::Midpoint => (nv * 0.5, nv * 0.5),
            ProjectionRule::LeftNode => (nv, Vec2::ZERO),
        }
    }

    /// Scalar normal components `p_i` so that `Π_i = p_i n_i`.
    pub fn op_pi_scalar(&self, phi: &[Vec2]) -> Result<Vec<f64>> {
        check_len(self.len(), phi.len())?;
        let n = phi.len();
        Ok((0..n)
            .map(|i| {
                let (a, b) = self.pi_coeffs(i);
                a.dot(phi[i]) + b.dot(phi[(i + 1) % n])
            })
            .collect())
    }

    /// Edge-wise normal projection `Π_i = p_i n_i`.
    pub fn op_pi(&self, phi: &[Vec2]) -> Result<Vec<Vec2>> {
        Ok(self
            .op_pi_scalar(phi)?
            .into_iter()
            .zip(&self.frame.normal)
            .map(|(p, &nv)| nv * p)
            .collect())
    }

    /// `K_i = (L_i, H_i)`.
    pub fn op_k(&self, phi: &[Vec2]) -> Result<Vec<Vec2>> {
        check_len(self.len(), phi.len())?;
        Ok((0..self.len())
            .map(|i| {
                let d = self.derivative(phi, i);
                Vec2::new(d.dot(self.frame.tangent[i]), d.dot(self.frame.normal[i]))
            })
            .collect())
    }

    /// Total variation of `H`: `Σ_i |H_i - H_{i-1}|`.
    pub fn penalty_v(&self, phi: &[Vec2]) -> Result<f64> {
        Ok(jump_sum(&self.op_hn(phi)?))
    }

    /// Total variation of `K` with Euclidean jumps.
    pub fn penalty_tvk(&self, phi: &[Vec2]) -> Result<f64> {
        self.penalty_tvk_with(phi, JumpNorm::Euclidean)
    }

    pub fn penalty_tvk_with(&self, phi: &[Vec2], norm: JumpNorm) -> Result<f64> {
        let k = self.op_k(phi)?;
        let n = k.len();
        Ok((0..n)
            .map(|i| {
                let d = k[i] - k[(i + n - 1) % n];
                match norm {
                    JumpNorm::Euclidean => d.norm(),
                    JumpNorm::L1 => d.x.abs() + d.y.abs(),
                }
            })
            .sum())
    }

    /// `‖L(Φ)‖_{L¹(Γ)} = Σ |L_i| · |Δ⁺Γ_i| / n`.
    pub fn l1_l(&self, phi: &[Vec2]) -> Result<f64> {
        Ok(self
            .op_l(phi)?
            .iter()
            .zip(&self.edge_len)
            .map(|(l, w)| l.abs() * w)
            .sum())
    }

    /// Scale of `dΦ/dΓ`, used to make the `L = 0` test relative.
    fn derivative_scale(&self, phi: &[Vec2]) -> f64 {
        (0..self.len())
            .map(|i| self.derivative(phi, i).norm())
            .fold(0.0, f64::max)
    }

    /// Penalty of the piecewise-rigid model: `TV(H)` plus membership of `L = 0`.
    pub fn evaluate_rigid(&self, phi: &[Vec2]) -> Result<PenaltyValue> {
        let l = self.op_l(phi)?;
        let scale = self.derivative_scale(phi);
        let max_l = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(PenaltyValue {
            tv: self.penalty_v(phi)?,
            feasible_c: max_l <= MEMBERSHIP_TOL * scale.max(f64::MIN_POSITIVE),
            l1_l: self.l1_l(phi)?,
        })
    }

    /// Penalty of the piecewise-similarity model with stretch budget `lambda`.
    pub fn evaluate_similarity(&self, phi: &[Vec2], lambda: f64) -> Result<PenaltyValue> {
        let l1_l = self.l1_l(phi)?;
        Ok(PenaltyValue {
            tv: self.penalty_tvk(phi)?,
            feasible_c: l1_l <= lambda * (1.0 + MEMBERSHIP_TOL) + f64::MIN_POSITIVE,
            l1_l,
        })
    }

    /// `‖Π(Φ - g)‖_{h¹}` against `ρ ‖Π g‖_{h¹}`.
    ///
    /// The P0 coefficient stack of `Π` is measured with the `h¹` matrix of the
    /// curve, as in the cone program.
    pub fn deviation_gap(
        &self,
        metrics: &CurveMetrics,
        phi: &[Vec2],
        g: &[Vec2],
        rho: f64,
    ) -> Result<DeviationGap> {
        check_len(self.len(), g.len())?;
        let diff: Vec<Vec2> = phi.iter().zip(g).map(|(&a, &b)| a - b).collect();
        let lhs = metrics.h1_norm(&self.op_pi(&diff)?);
        let rhs = rho * metrics.h1_norm(&self.op_pi(g)?);
        Ok(DeviationGap { lhs, rhs })
    }
}

/// Periodic jump sum `Σ_i |f_i - f_{i-1}|`.
pub fn jump_sum(f: &[f64]) -> f64 {
    let n = f.len();
    (0..n).map(|i| (f[i] - f[(i + n - 1) % n]).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyValue {
    pub tv: f64,
    pub feasible_c: bool,
    pub l1_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl DeviationGap {
    pub fn is_member(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + MEMBERSHIP_TOL) + f64::MIN_POSITIVE
    }
}

pub fn op_l(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<Vec<f64>> {
    RigidityOperators::new(curve).op_l(phi)
}

pub fn op_hn(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<Vec<f64>> {
    RigidityOperators::new(curve).op_hn(phi)
}

pub fn op_pi(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<Vec<Vec2>> {
    RigidityOperators::new(curve).op_pi(phi)
}

pub fn op_k(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<Vec<Vec2>> {
    RigidityOperators::new(curve).op_k(phi)
}

pub fn penalty_v(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<f64> {
    RigidityOperators::new(curve).penalty_v(phi)
}

pub fn penalty_tvk(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<f64> {
    RigidityOperators::new(curve).penalty_tvk(phi)
}

pub fn l1_l_gamma(curve: &DiscreteCurve, phi: &[Vec2]) -> Result<f64> {
    RigidityOperators::new(curve).l1_l(phi)
}

pub fn deviation_gap(
    curve: &DiscreteCurve,
    metrics: &CurveMetrics,
    phi: &[Vec2],
    g: &[Vec2],
    rho: f64,
) -> Result<DeviationGap> {
    RigidityOperators::new(curve).deviation_gap(metrics, phi, g, rho)
}

/// `a Γ^⊥ + b`: an infinitesimal rigid motion restricted to the curve.
pub fn rigid_field(curve: &DiscreteCurve, a: f64, b: Vec2) -> Vec<Vec2> {
    curve.nodes().iter().map(|p| p.perp() * a + b).collect()
}

/// `A Γ + b` with `A = [[α, -β], [β, α]]`: an infinitesimal similarity.
pub fn similarity_field(curve: &DiscreteCurve, alpha: f64, beta: f64, b: Vec2) -> Vec<Vec2> {
    curve
        .nodes()
        .iter()
        .map(|p| Vec2::new(alpha * p.x - beta * p.y, beta * p.x + alpha * p.y) + b)
        .collect()
}
