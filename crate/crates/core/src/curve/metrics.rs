//! Mass and stiffness matrices of a P1 curve.
//!
//! Both matrices couple only neighbouring nodes on the periodic grid, so they
//! are stored as cyclic tridiagonal matrices. They act identically on the
//! `x` and `y` coordinates of a field.

use super::{DiscreteCurve, EdgeFrame};
use crate::vec2::Vec2;

/// Symmetric matrix with nonzeros on the diagonal and between `i` and
/// `i + 1 (mod n)`. `off[i]` is the `(i, i+1)` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Adds `w * [[a, b], [b, c]]` on the index pair `(i, i+1)`.
    fn add_block(&mut self, i: usize, w: f64, a: f64, b: f64, c: f64) {
        let n = self.len();
        self.diag[i] += w * a;
        self.off[i] += w * b;
        self.diag[(i + 1) % n] += w * c;
    }

    pub fn mul_scalar(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                self.diag[i] * x[i] + self.off[i] * x[next] + self.off[prev] * x[prev]
            })
            .collect()
    }

    /// Blockwise action on a field of 2-vectors.
    pub fn apply(&self, x: &[Vec2]) -> Vec<Vec2> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                x[i] * self.diag[i] + x[next] * self.off[i] + x[prev] * self.off[prev]
            })
            .collect()
    }

    pub fn add(&self, other: &CyclicTridiagonal) -> CyclicTridiagonal {
        CyclicTridiagonal {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            let j = (i + 1) % n;
            m[i][i] += self.diag[i];
            m[i][j] += self.off[i];
            m[j][i] += self.off[i];
        }
        m
    }

    /// Cholesky factorisation; `None` if a pivot is not positive.
    pub fn cholesky(&self) -> Option<CyclicCholesky> {
        CyclicCholesky::factor(self)
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = A` for a cyclic tridiagonal `A`.
///
/// Rows `0..n-1` of `L` hold a diagonal and a subdiagonal entry; the last row
/// is dense (fill-in from the periodic corner).
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicCholesky {
    diag: Vec<f64>,
    /// `sub[i] = L[i][i-1]` for `1 <= i <= n-2`; `sub[0]` and `sub[n-1]` unused.
    sub: Vec<f64>,
    /// `last[j] = L[n-1][j]` for `j < n-1`.
    last: Vec<f64>,
}

impl CyclicCholesky {
    fn factor(a: &CyclicTridiagonal) -> Option<Self> {
        let n = a.len();
        assert!(n >= 3, "cyclic factorisation needs n >= 3");
        let mut diag = vec![0.0; n];
        let mut sub = vec![0.0; n];
        let mut last = vec![0.0; n - 1];

        for i in 0..n - 1 {
            let mut d = a.diag[i];
            if i > 0 {
                sub[i] = a.off[i - 1] / diag[i - 1];
                d -= sub[i] * sub[i];
            }
            if !(d > 0.0) {
                return None;
            }
            diag[i] = d.sqrt();
        }
        // Entries A[n-1][j] for j < n-1: the corner coupling and the neighbour.
        for j in 0..n - 1 {
            let mut a_nj = 0.0;
            if j == 0 {
                a_nj += a.off[n - 1];
            }
            if j == n - 2 {
                a_nj += a.off[n - 2];
            }
            let carried = if j > 0 { last[j - 1] * sub[j] } else { 0.0 };
            last[j] = (a_nj - carried) / diag[j];
        }
        let d = a.diag[n - 1] - last.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        diag[n - 1] = d.sqrt();
        Some(Self { diag, sub, last })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Smallest diagonal entry of the factor (square root of the smallest pivot).
    pub fn min_pivot(&self) -> f64 {
        self.diag.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n - 1 {
            let mut r = b[i];
            if i > 0 {
                r -= self.sub[i] * y[i - 1];
            }
            y[i] = r / self.diag[i];
        }
        let r = b[n - 1] - self.last.iter().zip(&y).map(|(l, v)| l * v).sum::<f64>();
        y[n - 1] = r / self.diag[n - 1];

        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] / self.diag[n - 1];
        for i in (0..n - 1).rev() {
            let mut r = y[i] - self.last[i] * x[n - 1];
            if i + 1 <= n - 2 {
                r -= self.sub[i + 1] * x[i + 1];
            }
            x[i] = r / self.diag[i];
        }
        x
    }

    pub fn solve_field(&self, b: &[Vec2]) -> Vec<Vec2> {
        let xs: Vec<f64> = b.iter().map(|v| v.x).collect();
        let ys: Vec<f64> = b.iter().map(|v| v.y).collect();
        let sx = self.solve(&xs);
        let sy = self.solve(&ys);
        sx.into_iter().zip(sy).map(|(x, y)| Vec2::new(x, y)).collect()
    }

    /// Nonzero entries `(row, col, value)` of `W = Lᵀ`, so that `WᵀW = A`.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            out.push((i, i, self.diag[i]));
            if i + 1 <= n - 2 {
                out.push((i, i + 1, self.sub[i + 1]));
            }
            if i < n - 1 {
                out.push((i, n - 1, self.last[i]));
            }
        }
        out
    }

    /// `W x` with `W = Lᵀ`.
    pub fn apply_upper(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (r, c, v) in self.upper_entries() {
            out[r] += v * x[c];
        }
        out
    }

    pub fn upper_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut w = vec![vec![0.0; n]; n];
        for (r, c, v) in self.upper_entries() {
            w[r][c] += v;
        }
        w
    }
}

/// Which stiffness block to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StiffnessForm {
    /// `∫ dΦ/dΓ · dΨ/dΓ dΓ` on each edge: block `(n / speed_i) [[1, -1], [-1, 1]]`.
    #[default]
    Intrinsic,
    /// Block `speed_i · n [[1/s_i², -1/(s_i s_{i+1})], [·, 1/s_{i+1}²]]` with
    /// node-indexed speeds. Agrees with `Intrinsic` only on uniform-speed
    /// curves and does not annihilate constant fields otherwise.
    NodeWeighted,
}

/// Mass matrix `M`, stiffness `N`, metric `U = M + N` and a factor of `U`.
#[derive(Debug, Clone)]
pub struct CurveMetrics {
    pub mass: CyclicTridiagonal,
    pub stiffness: CyclicTridiagonal,
    pub metric: CyclicTridiagonal,
    pub factor: CyclicCholesky,
}

impl CurveMetrics {
    pub fn assemble(curve: &DiscreteCurve) -> Self {
        Self::assemble_with(curve, StiffnessForm::Intrinsic)
    }

    pub fn assemble_with(curve: &DiscreteCurve, form: StiffnessForm) -> Self {
        let frame = EdgeFrame::of(curve);
        let n = curve.len();
        let nf = n as f64;
        let mut mass = CyclicTridiagonal::zeros(n);
        let mut stiffness = CyclicTridiagonal::zeros(n);
        for i in 0..n {
            let s = frame.speed[i];
            mass.add_block(i, s / (6.0 * nf), 2.0, 1.0, 2.0);
            match form {
                StiffnessForm::Intrinsic => stiffness.add_block(i, nf / s, 1.0, -1.0, 1.0),
                StiffnessForm::NodeWeighted => {
                    let s1 = frame.speed[(i + 1) % n];
                    stiffness.add_block(i, s * nf, 1.0 / (s * s), -1.0 / (s * s1), 1.0 / (s1 * s1))
                }
            }
        }
        let metric = mass.add(&stiffness);
        let factor = metric
            .cholesky()
            .expect("mass + stiffness of a non-degenerate curve is positive definite");
        Self {
            mass,
            stiffness,
            metric,
            factor,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `U⁻¹ b`, per coordinate.
    pub fn solve_metric(&self, b: &[Vec2]) -> Vec<Vec2> {
        self.factor.solve_field(b)
    }

    /// `h1` norm of a field.
    pub fn h1_norm(&self, f: &[Vec2]) -> f64 {
        super::inner_h1(self, f, f).max(0.0).sqrt()
    }
}
