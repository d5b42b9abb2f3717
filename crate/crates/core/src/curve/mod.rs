//! Discrete closed curves in the P1 finite-element space.
//!
//! Node `i` of a curve with `n` nodes sits at parameter `i/n` on the periodic
//! interval; edge `i` joins node `i` to node `i + 1 (mod n)`. Derivatives of
//! P1 fields are P0 (one value per edge).

mod metrics;
mod resample;

use std::ops::{Deref, DerefMut, Mul, Sub};

pub use metrics::{CurveMetrics, CyclicCholesky, CyclicTridiagonal, StiffnessForm};
pub use resample::resample_arclength;

use crate::error::{FinslerError, Result};
use crate::vec2::Vec2;

/// Relative edge-degeneracy threshold, scaled by the bounding-box diagonal.
pub const EDGE_EPS_REL: f64 = 1e-12;

/// Closed piecewise-linear curve given by its `n >= 3` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    nodes: Vec<Vec2>,
}

impl DiscreteCurve {
    /// Validates node count, finiteness and edge speeds.
    pub fn new(nodes: Vec<Vec2>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(FinslerError::TooFewPoints { found: nodes.len() });
        }
        if let Some(index) = nodes.iter().position(|p| !p.is_finite()) {
            return Err(FinslerError::NonFinite { index });
        }
        let curve = Self { nodes };
        curve.check_edges()?;
        Ok(curve)
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|&p| Vec2::from(p)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Vec2> {
        self.nodes
    }

    /// Node `i` with periodic indexing.
    #[inline]
    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i % self.nodes.len()]
    }

    /// Raw edge vector `Γ_{i+1} - Γ_i` (without the factor `n`).
    #[inline]
    pub fn edge(&self, i: usize) -> Vec2 {
        let n = self.nodes.len();
        self.nodes[(i + 1) % n] - self.nodes[i % n]
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        bbox(&self.nodes)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Edge speed threshold `EDGE_EPS_REL * diag(bbox)`.
    pub fn edge_threshold(&self) -> f64 {
        EDGE_EPS_REL * self.bbox_diagonal()
    }

    fn check_edges(&self) -> Result<()> {
        let threshold = self.edge_threshold();
        let n = self.len() as f64;
        for i in 0..self.len() {
            let speed = n * self.edge(i).norm();
            if !(speed > threshold) {
                return Err(FinslerError::DegenerateEdge {
                    index: i,
                    speed,
                    threshold,
                });
            }
        }
        Ok(())
    }

    /// `Γ + t Φ`, validated.
    pub fn displaced(&self, field: &[Vec2], t: f64) -> Result<Self> {
        check_len(self.len(), field.len())?;
        Self::new(
            self.nodes
                .iter()
                .zip(field)
                .map(|(&p, &v)| p + v * t)
                .collect(),
        )
    }

    /// Applies `p -> R(angle) p + shift` to every node.
    pub fn rigid_transform(&self, angle: f64, shift: Vec2) -> Self {
        Self {
            nodes: self.nodes.iter().map(|p| p.rotate(angle) + shift).collect(),
        }
    }

    /// Same nodes in reverse order, keeping node 0 in place.
    pub fn reversed(&self) -> Self {
        let mut nodes = Vec::with_capacity(self.len());
        nodes.push(self.nodes[0]);
        nodes.extend(self.nodes[1..].iter().rev());
        Self { nodes }
    }

    /// Shoelace signed area; positive for counter-clockwise curves.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.nodes)
    }

    /// Sum of edge lengths, i.e. `Σ |Δ⁺Γ_i| / n`.
    pub fn length(&self) -> f64 {
        (0..self.len()).map(|i| self.edge(i).norm()).sum()
    }

    pub fn edge_frame(&self) -> EdgeFrame {
        EdgeFrame::of(self)
    }

    pub fn metrics(&self) -> CurveMetrics {
        CurveMetrics::assemble(self)
    }
}

pub fn curve_length(curve: &DiscreteCurve) -> f64 {
    curve.length()
}

pub(crate) fn bbox(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

pub(crate) fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(FinslerError::SizeMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// P1 deformation field: one vector per node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TangentField(pub Vec<Vec2>);

impl TangentField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Vec2::ZERO; n])
    }

    pub fn constant(n: usize, c: Vec2) -> Self {
        Self(vec![c; n])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|&v| v * s).collect())
    }

    pub fn add(&self, other: &[Vec2]) -> Self {
        Self(self.0.iter().zip(other).map(|(&a, &b)| a + b).collect())
    }

    /// Euclidean norm on `R^{2n}`.
    pub fn euclidean_norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.y).collect()
    }

    pub fn from_components(xs: &[f64], ys: &[f64]) -> Self {
        Self(xs.iter().zip(ys).map(|(&x, &y)| Vec2::new(x, y)).collect())
    }
}

impl Deref for TangentField {
    type Target = [Vec2];
    fn deref(&self) -> &[Vec2] {
        &self.0
    }
}

impl DerefMut for TangentField {
    fn deref_mut(&mut self) -> &mut [Vec2] {
        &mut self.0
    }
}

impl From<Vec<Vec2>> for TangentField {
    fn from(v: Vec<Vec2>) -> Self {
        Self(v)
    }
}

/// Canonical pairing `Σ ⟨f_i, g_i⟩` on `R^{2n}`.
pub fn dot(f: &[Vec2], g: &[Vec2]) -> f64 {
    f.iter().zip(g).map(|(a, b)| a.dot(*b)).sum()
}

/// `Δ⁺(f)_i = n (f_{i+1} - f_i)`, periodic.
pub fn forward_diff<T>(f: &[T]) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = f.len();
    (0..n).map(|i| (f[(i + 1) % n] - f[i]) * n as f64).collect()
}

/// `Δ⁻(f)_i = n (f_i - f_{i-1})`, periodic.
pub fn backward_diff<T>(f: &[T]) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = f.len();
    (0..n).map(|i| (f[i] - f[(i + n - 1) % n]) * n as f64).collect()
}

/// Per-edge unit tangent, unit normal (tangent rotated by +90°) and speed.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFrame {
    pub tangent: Vec<Vec2>,
    pub normal: Vec<Vec2>,
    pub speed: Vec<f64>,
}

impl EdgeFrame {
    fn of(curve: &DiscreteCurve) -> Self {
        let d = forward_diff(curve.nodes());
        let speed: Vec<f64> = d.iter().map(|v| v.norm()).collect();
        let tangent: Vec<Vec2> = d.iter().zip(&speed).map(|(&v, &s)| v / s).collect();
        let normal = tangent.iter().map(|t| t.perp()).collect();
        Self {
            tangent,
            normal,
            speed,
        }
    }

    /// Checked construction from an arbitrary node list.
    pub fn try_from_nodes(nodes: &[Vec2]) -> Result<Self> {
        Ok(DiscreteCurve::new(nodes.to_vec())?.edge_frame())
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }
}

pub fn edge_frame(curve: &DiscreteCurve) -> EdgeFrame {
    curve.edge_frame()
}

pub fn assemble_metrics(curve: &DiscreteCurve) -> CurveMetrics {
    curve.metrics()
}

/// `⟨Φ, M Ψ⟩`: the `L²(Γ)` product of the P1 interpolants.
pub fn inner_l2(metrics: &CurveMetrics, phi: &[Vec2], psi: &[Vec2]) -> f64 {
    dot(phi, &metrics.mass.apply(psi))
}

/// `⟨Φ, U Ψ⟩`: the `W^{1,2}(Γ)` product of the P1 interpolants.
pub fn inner_h1(metrics: &CurveMetrics, phi: &[Vec2], psi: &[Vec2]) -> f64 {
    dot(phi, &metrics.metric.apply(psi))
}
