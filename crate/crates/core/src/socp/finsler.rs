//! Cone program whose minimiser is the discrete Finsler descent direction.
//!
//! Given the `h¹` gradient `g`, the direction `Φ` minimises the jump sum of
//! `H(Φ)` (rigid) or of `K(Φ)` (similarity) subject to
//! `‖W Π(Φ - g)‖ ≤ ρ ‖W Π g‖`, where `WᵀW = U`, and to `L(Φ) = 0` (rigid)
//! or `‖L(Φ)‖_{L¹} ≤ λ` (similarity).
//!
//! The deviation bound only sees normal components, while the discrete `g`
//! is not exactly normal, so a minimiser can fail to be a descent direction.
//! [`ProgramOptions::angle_cone`] adds the angle condition
//! `⟨g, Φ⟩_U ≥ (1 - ρ) ‖g‖_U ‖Φ‖_U`.
//!
//! The program is built for `g / r` with `r = ‖W Π g‖`, which keeps the cone
//! data of order one; [`FinslerProgram::extract_field`] undoes the scaling.

use serde::{Deserialize, Serialize};

use super::program::{ConeBlock, ConeProgram, SparseRow};
use super::solver::{check_kkt, dual_layout, solve, ConeSolution, ConeStatus, DEFAULT_TOL};
use crate::curve::{check_len, CurveMetrics, DiscreteCurve, TangentField};
use crate::error::{FinslerError, Result};
use crate::penalty::RigidityOperators;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FinslerVariant {
    Rigid,
    Similarity { lambda: f64 },
}

/// Variable offsets. `phi` holds `(x, y)` pairs node by node; `s` holds the
/// `(x, y)` rows of `W Π(Φ - g)` node by node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinslerLayout {
    pub n: usize,
    pub phi: usize,
    pub z: usize,
    pub s: usize,
    pub t: usize,
    /// Jumps of `K` (similarity only), `(x, y)` pairs.
    pub d: Option<usize>,
    /// Positive and negative parts of `L` (similarity only).
    pub lp: Option<usize>,
    pub lm: Option<usize>,
    /// First inequality row of the `±jump - Z ≤ 0` pairs (rigid only).
    pub jump_rows: Option<usize>,
    /// First cone block of the `|D_i| ≤ Z_i` blocks (similarity only).
    pub jump_cones: Option<usize>,
    /// `W Φ` as `(x, y)` pairs node by node, bounded by `angle_t`.
    pub angle: Option<usize>,
    pub angle_t: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramOptions {
    /// Impose `⟨g, Φ⟩_U ≥ (1 - ρ) ‖g‖_U ‖Φ‖_U`.
    pub angle_cone: bool,
}

#[derive(Debug, Clone)]
pub struct FinslerProgram {
    pub program: ConeProgram,
    pub layout: FinslerLayout,
    /// `r = ‖W Π g‖`; the program is posed for `g / r`.
    pub scale: f64,
    pub rho: f64,
    pub variant: FinslerVariant,
    ops: RigidityOperators,
    nodes: Vec<Vec2>,
    upper: Vec<(usize, usize, f64)>,
    /// `Π(g / r)`.
    target_pi: Vec<Vec2>,
    /// `U g / ((1 - ρ) ‖g‖_U)`.
    angle_coeffs: Vec<Vec2>,
}

impl FinslerProgram {
    pub fn extract_field(&self, z: &[f64]) -> TangentField {
        let l = &self.layout;
        TangentField(
            (0..l.n)
                .map(|i| Vec2::new(z[l.phi + 2 * i], z[l.phi + 2 * i + 1]) * self.scale)
                .collect(),
        )
    }

    /// Objective in the units of the unscaled problem.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.program.objective_value(z) * self.scale
    }
}

fn phi_terms(row: &mut SparseRow, layout: &FinslerLayout, node: usize, coeff: Vec2) {
    row.push(layout.phi + 2 * node, coeff.x);
    row.push(layout.phi + 2 * node + 1, coeff.y);
}

/// Adds `sign · (F_i - F_{i-1})` to `row` for an edge functional `F` with
/// node coefficients `coeffs(i) = (on Φ_i, on Φ_{i+1})`.
fn add_jump(
    row: &mut SparseRow,
    layout: &FinslerLayout,
    i: usize,
    sign: f64,
    coeffs: impl Fn(usize) -> (Vec2, Vec2),
) {
    let n = layout.n;
    let prev = (i + n - 1) % n;
    let (a, b) = coeffs(i);
    phi_terms(row, layout, i, a * sign);
    phi_terms(row, layout, (i + 1) % n, b * sign);
    let (a, b) = coeffs(prev);
    phi_terms(row, layout, prev, a * -sign);
    phi_terms(row, layout, i, b * -sign);
}

pub fn build_finsler_program(
    curve: &DiscreteCurve,
    metrics: &CurveMetrics,
    g: &[Vec2],
    rho: f64,
    variant: FinslerVariant,
) -> Result<FinslerProgram> {
    build_finsler_program_with(curve, metrics, g, rho, variant, ProgramOptions::default())
}

pub fn build_finsler_program_with(
    curve: &DiscreteCurve,
    metrics: &CurveMetrics,
    g: &[Vec2],
    rho: f64,
    variant: FinslerVariant,
    options: ProgramOptions,
) -> Result<FinslerProgram> {
    let ops = &RigidityOperators::new(curve);
    let n = ops.len();
    check_len(n, g.len())?;
    check_len(n, metrics.len())?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(FinslerError::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    if let FinslerVariant::Similarity { lambda } = variant {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(FinslerError::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(FinslerError::InvalidParameter("gradient is not finite".into()));
    }
    let pg = ops.op_pi(g)?;
    let scale = metrics.h1_norm(&pg);
    if !(scale > 0.0) {
        return Err(FinslerError::ZeroGradient);
    }
    let pg_scaled: Vec<Vec2> = pg.iter().map(|&v| v / scale).collect();

    let mut p = ConeProgram::new(0);
    let phi = p.add_vars("phi", 2 * n);
    let z = p.add_vars("zjump", n);
    let s = p.add_vars("s", 2 * n);
    let t = p.add_vars("t", n);
    let mut layout = FinslerLayout {
        n,
        phi,
        z,
        s,
        t,
        d: None,
        lp: None,
        lm: None,
        jump_rows: None,
        jump_cones: None,
        angle: None,
        angle_t: None,
    };
    for i in 0..n {
        p.var_names[phi + 2 * i] = format!("phi[{i}].x");
        p.var_names[phi + 2 * i + 1] = format!("phi[{i}].y");
        p.var_names[s + 2 * i] = format!("s[{i}].x");
        p.var_names[s + 2 * i + 1] = format!("s[{i}].y");
        p.objective[z + i] = 1.0;
    }

    match variant {
        FinslerVariant::Rigid => {
            layout.jump_rows = Some(p.ineq_rows.len());
            for i in 0..n {
                // ±(H_i - H_{i-1}) - Z_i ≤ 0
                for sign in [1.0, -1.0] {
                    let mut row = SparseRow::new();
                    add_jump(&mut row, &layout, i, sign, |k| ops.h_coeffs(k));
                    row.push(z + i, -1.0);
                    p.add_le(row, 0.0);
                }
            }
            for i in 0..n {
                let (a, b) = ops.l_coeffs(i);
                let mut row = SparseRow::new();
                phi_terms(&mut row, &layout, i, a);
                phi_terms(&mut row, &layout, (i + 1) % n, b);
                p.add_eq(row, 0.0);
            }
        }
        FinslerVariant::Similarity { lambda } => {
            let d = p.add_vars("d", 2 * n);
            let lp = p.add_vars("lpos", n);
            let lm = p.add_vars("lneg", n);
            layout.d = Some(d);
            layout.lp = Some(lp);
            layout.lm = Some(lm);
            layout.jump_cones = Some(p.cones.len());
            for i in 0..n {
                // D_i = K_i - K_{i-1}, |D_i| ≤ Z_i
                let mut row = SparseRow::new();
                add_jump(&mut row, &layout, i, 1.0, |k| ops.l_coeffs(k));
                row.push(d + 2 * i, -1.0);
                p.add_eq(row, 0.0);
                let mut row = SparseRow::new();
                add_jump(&mut row, &layout, i, 1.0, |k| ops.h_coeffs(k));
                row.push(d + 2 * i + 1, -1.0);
                p.add_eq(row, 0.0);
                p.add_cone(ConeBlock::SecondOrder { s: vec![d + 2 * i, d + 2 * i + 1], t: z + i });
            }
            let mut budget = SparseRow::new();
            for i in 0..n {
                // L_i = P_i - Q_i with P, Q ≥ 0
                let (a, b) = ops.l_coeffs(i);
                let mut row = SparseRow::new();
                phi_terms(&mut row, &layout, i, a);
                phi_terms(&mut row, &layout, (i + 1) % n, b);
                row.push(lp + i, -1.0);
                row.push(lm + i, 1.0);
                p.add_eq(row, 0.0);
                p.add_le(SparseRow::new().with(lp + i, -1.0), 0.0);
                p.add_le(SparseRow::new().with(lm + i, -1.0), 0.0);
                let w = ops.edge_lengths()[i];
                budget.push(lp + i, w);
                budget.push(lm + i, w);
            }
            p.add_le(budget, lambda / scale);
        }
    }

    // S = W Π(Φ) - W Π(g / r), per coordinate.
    let normals = &ops.frame().normal;
    let upper = metrics.factor.upper_entries();
    let mut rows_x: Vec<SparseRow> = vec![SparseRow::new(); n];
    let mut rows_y: Vec<SparseRow> = vec![SparseRow::new(); n];
    let mut rhs_x = vec![0.0; n];
    let mut rhs_y = vec![0.0; n];
    for &(r, c, w) in &upper {
        // Column c of Π(Φ) is p_c n_c with p_c = a·Φ_c + b·Φ_{c+1}.
        let (a, b) = ops.pi_coeffs(c);
        let nc = normals[c];
        phi_terms(&mut rows_x[r], &layout, c, a * (w * nc.x));
        phi_terms(&mut rows_x[r], &layout, (c + 1) % n, b * (w * nc.x));
        phi_terms(&mut rows_y[r], &layout, c, a * (w * nc.y));
        phi_terms(&mut rows_y[r], &layout, (c + 1) % n, b * (w * nc.y));
        rhs_x[r] += w * pg_scaled[c].x;
        rhs_y[r] += w * pg_scaled[c].y;
    }
    for (j, ((mut rx, mut ry), (bx, by))) in rows_x
        .into_iter()
        .zip(rows_y)
        .zip(rhs_x.into_iter().zip(rhs_y))
        .enumerate()
    {
        rx.push(s + 2 * j, -1.0);
        ry.push(s + 2 * j + 1, -1.0);
        p.add_eq(rx, bx);
        p.add_eq(ry, by);
        p.add_cone(ConeBlock::RotatedUnit { s: vec![s + 2 * j, s + 2 * j + 1], t: t + j });
    }
    let mut sum_t = SparseRow::new();
    for j in 0..n {
        sum_t.push(t + j, 1.0);
    }
    p.add_le(sum_t, rho * rho);

    let ug = metrics.metric.apply(g);
    let gnorm = metrics.h1_norm(g);
    let angle_coeffs: Vec<Vec2> = ug.iter().map(|&v| v / ((1.0 - rho) * gnorm)).collect();
    if options.angle_cone {
        // |W Φ| ≤ ⟨U g, Φ⟩ / ((1 - ρ) ‖g‖_U)
        let angle = p.add_vars("wphi", 2 * n);
        let angle_t = p.add_vars("angle", 1);
        layout.angle = Some(angle);
        layout.angle_t = Some(angle_t);
        let mut rows_x: Vec<SparseRow> = vec![SparseRow::new(); n];
        let mut rows_y: Vec<SparseRow> = vec![SparseRow::new(); n];
        for &(r, c, w) in &upper {
            rows_x[r].push(phi + 2 * c, w);
            rows_y[r].push(phi + 2 * c + 1, w);
        }
        for (j, (mut rx, mut ry)) in rows_x.into_iter().zip(rows_y).enumerate() {
            rx.push(angle + 2 * j, -1.0);
            ry.push(angle + 2 * j + 1, -1.0);
            p.add_eq(rx, 0.0);
            p.add_eq(ry, 0.0);
        }
        let mut row = SparseRow::new();
        for (i, v) in angle_coeffs.iter().enumerate() {
            phi_terms(&mut row, &layout, i, *v);
        }
        row.push(angle_t, -1.0);
        p.add_eq(row, 0.0);
        p.add_cone(ConeBlock::SecondOrder { s: (angle..angle + 2 * n).collect(), t: angle_t });
    }

    Ok(FinslerProgram {
        program: p,
        layout,
        scale,
        rho,
        variant,
        ops: ops.clone(),
        nodes: curve.nodes().to_vec(),
        upper,
        target_pi: pg_scaled,
        angle_coeffs,
    })
}

#[derive(Debug, Clone)]
pub struct FinslerSolution {
    pub field: TangentField,
    /// `Σ Z_i` rescaled to the units of `g`.
    pub objective: f64,
    pub cone: ConeSolution,
    pub scale: f64,
}

impl FinslerSolution {
    pub fn status(&self) -> ConeStatus {
        self.cone.status
    }
}

/// Builds and solves the program; `Infeasible` and `Unbounded` are errors,
/// a non-converged solve is returned with `ConeStatus::MaxIter`.
pub fn solve_finsler(
    curve: &DiscreteCurve,
    metrics: &CurveMetrics,
    g: &[Vec2],
    rho: f64,
    variant: FinslerVariant,
    tol: f64,
    max_iter: u32,
) -> Result<FinslerSolution> {
    solve_finsler_with(curve, metrics, g, rho, variant, ProgramOptions::default(), tol, max_iter)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_finsler_with(
    curve: &DiscreteCurve,
    metrics: &CurveMetrics,
    g: &[Vec2],
    rho: f64,
    variant: FinslerVariant,
    options: ProgramOptions,
    tol: f64,
    max_iter: u32,
) -> Result<FinslerSolution> {
    let fp = build_finsler_program_with(curve, metrics, g, rho, variant, options)?;
    solve_program(&fp, tol, max_iter)
}

/// Solves a Finsler program.
///
/// When some rigid field (or similarity field within the stretch budget)
/// already meets the deviation constraint, the optimum is zero and is
/// attained there; this case is solved directly by least squares over that
/// small subspace, with an explicit dual certificate. Otherwise, or if the
/// certificate does not pass [`check_kkt`](super::check_kkt), the interior-point
/// solver is used.
pub fn solve_program(fp: &FinslerProgram, tol: f64, max_iter: u32) -> Result<FinslerSolution> {
    let cone = match fp.zero_objective_solution() {
        Some(sol) if sol.kkt.max() <= tol => ConeSolution { status: ConeStatus::Optimal, ..sol },
        _ => solve(&fp.program, tol, max_iter)?,
    };
    match cone.status {
        ConeStatus::Infeasible => return Err(FinslerError::Infeasible),
        ConeStatus::Unbounded => {
            return Err(FinslerError::Solver("cone program reported unbounded".into()))
        }
        _ => {}
    }
    Ok(FinslerSolution {
        field: fp.extract_field(&cone.z),
        objective: fp.objective(&cone.z),
        scale: fp.scale,
        cone,
    })
}

/// Solves the symmetric system `a x = b` by Gaussian elimination with
/// partial pivoting; `None` if it is numerically singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let scale = (0..m).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-13 * scale) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let tail: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

impl FinslerProgram {
    /// `W` applied to each coordinate of a P0 stack of 2-vectors.
    fn apply_w(&self, v: &[Vec2]) -> Vec<Vec2> {
        let mut out = vec![Vec2::ZERO; v.len()];
        for &(r, c, w) in &self.upper {
            out[r] += v[c] * w;
        }
        out
    }

    /// Least-squares fit of `W Π Φ` to `W Π g` over `Φ ∈ span(basis)`.
    fn fit(&self, basis: &[Vec<Vec2>]) -> Option<(Vec<Vec2>, Vec<Vec2>, f64)> {
        let images: Vec<Vec<Vec2>> = basis
            .iter()
            .map(|b| self.ops.op_pi(b).map(|p| self.apply_w(&p)))
            .collect::<Result<_>>()
            .ok()?;
        let target = self.apply_w(&self.target_pi);
        let ip = |a: &[Vec2], b: &[Vec2]| -> f64 { a.iter().zip(b).map(|(x, y)| x.dot(*y)).sum() };
        let m = basis.len();
        let gram: Vec<Vec<f64>> = (0..m)
            .map(|k| (0..m).map(|l| ip(&images[k], &images[l])).collect())
            .collect();
        let rhs: Vec<f64> = images.iter().map(|im| ip(im, &target)).collect();
        let coef = solve_small(gram, rhs)?;
        let n = self.layout.n;
        let mut phi = vec![Vec2::ZERO; n];
        let mut s = target.iter().map(|&t| -t).collect::<Vec<_>>();
        for (k, c) in coef.iter().enumerate() {
            for i in 0..n {
                phi[i] += basis[k][i] * *c;
                s[i] += images[k][i] * *c;
            }
        }
        let dev2: f64 = s.iter().map(|v| v.norm_sq()).sum();
        Some((phi, s, dev2))
    }

    fn zero_objective_candidate(&self) -> Option<(Vec<Vec2>, Vec<Vec2>, f64)> {
        let n = self.layout.n;
        let centroid = self.nodes.iter().fold(Vec2::ZERO, |a, &p| a + p) / n as f64;
        let rel: Vec<Vec2> = self.nodes.iter().map(|&p| p - centroid).collect();
        let rigid = vec![
            vec![Vec2::new(1.0, 0.0); n],
            vec![Vec2::new(0.0, 1.0); n],
            rel.iter().map(|p| p.perp()).collect::<Vec<_>>(),
        ];
        let rho2 = self.rho * self.rho;
        if let FinslerVariant::Similarity { lambda } = self.variant {
            let mut simil = rigid.clone();
            simil.push(rel.clone());
            if let Some((phi, s, dev2)) = self.fit(&simil) {
                let stretch = self.ops.l1_l(&phi).ok()?;
                if dev2 <= rho2 && stretch <= lambda / self.scale {
                    return Some((phi, s, dev2));
                }
            }
        }
        self.fit(&rigid).filter(|c| c.2 <= rho2)
    }

    /// Zero-objective optimum with a dual certificate, if one exists in the
    /// rigid (or similarity) subspace.
    fn zero_objective_solution(&self) -> Option<ConeSolution> {
        let (phi, s, dev2) = self.zero_objective_candidate()?;
        let l = &self.layout;
        let n = l.n;
        let mut z = vec![0.0; self.program.num_vars];
        for i in 0..n {
            z[l.phi + 2 * i] = phi[i].x;
            z[l.phi + 2 * i + 1] = phi[i].y;
            z[l.s + 2 * i] = s[i].x;
            z[l.s + 2 * i + 1] = s[i].y;
            z[l.t + i] = s[i].norm_sq() + (self.rho * self.rho - dev2) / n as f64;
        }
        if let (Some(angle), Some(angle_t)) = (l.angle, l.angle_t) {
            let wphi = self.apply_w(&phi);
            let bound: f64 = self.angle_coeffs.iter().zip(&phi).map(|(a, f)| a.dot(*f)).sum();
            if wphi.iter().map(|v| v.norm_sq()).sum::<f64>().sqrt() > bound {
                return None;
            }
            for i in 0..n {
                z[angle + 2 * i] = wphi[i].x;
                z[angle + 2 * i + 1] = wphi[i].y;
            }
            z[angle_t] = bound;
        }
        let layout = dual_layout(&self.program);
        let mut dual = vec![0.0; layout.len];
        match self.variant {
            FinslerVariant::Rigid => {
                let h = self.ops.op_hn(&phi).ok()?;
                let rows = layout.ineq + l.jump_rows?;
                for i in 0..n {
                    z[l.z + i] = (h[i] - h[(i + n - 1) % n]).abs();
                    // Equal weights on the two sides cancel the Φ terms.
                    dual[rows + 2 * i] = 0.5;
                    dual[rows + 2 * i + 1] = 0.5;
                }
            }
            FinslerVariant::Similarity { .. } => {
                let k = self.ops.op_k(&phi).ok()?;
                let lv = self.ops.op_l(&phi).ok()?;
                let (d, lp, lm, cones) = (l.d?, l.lp?, l.lm?, l.jump_cones?);
                for i in 0..n {
                    let jump = k[i] - k[(i + n - 1) % n];
                    z[d + 2 * i] = jump.x;
                    z[d + 2 * i + 1] = jump.y;
                    z[l.z + i] = jump.norm();
                    z[lp + i] = lv[i].max(0.0);
                    z[lm + i] = (-lv[i]).max(0.0);
                    dual[layout.cones[cones + i]] = 1.0;
                }
            }
        }
        let kkt = check_kkt(&self.program, &z, &dual).ok()?;
        Some(ConeSolution {
            objective: self.program.objective_value(&z),
            z,
            dual,
            status: if kkt.max() <= DEFAULT_TOL { ConeStatus::Optimal } else { ConeStatus::MaxIter },
            kkt,
            iterations: 0,
            backend_status: "ZeroObjectiveSubspace".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{deviation_gap, rigid_field, similarity_field};
    use crate::socp::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wobbly(n: usize, seed: u64) -> DiscreteCurve {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DiscreteCurve::new(
            (0..n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let r = 1.0 + 0.2 * rng.gen_range(-1.0..1.0);
                    Vec2::new(1.3 * r * a.cos(), r * a.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    fn random_field(n: usize, seed: u64) -> Vec<Vec2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn rigid_gradient_is_reproduced() {
        let c = wobbly(16, 1);
        let m = c.metrics();
        let g = rigid_field(&c, 0.8, Vec2::new(0.3, -0.2));
        let sol = solve_finsler(&c, &m, &g, 0.99, FinslerVariant::Rigid, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status(), ConeStatus::Optimal);
        assert!(sol.objective.abs() < 1e-6);
        let ops = RigidityOperators::new(&c);
        assert!(ops.penalty_v(&sol.field).unwrap() < 1e-5);
    }

    #[test]
    fn zero_gradient_rejected() {
        let c = wobbly(8, 2);
        let m = c.metrics();
        let g = vec![Vec2::ZERO; 8];
        assert!(matches!(
            build_finsler_program(&c, &m, &g, 0.5, FinslerVariant::Rigid),
            Err(FinslerError::ZeroGradient)
        ));
    }

    #[test]
    fn rigid_solution_is_certified() {
        let c = wobbly(24, 3);
        let m = c.metrics();
        let g = random_field(24, 4);
        let sol = solve_finsler(&c, &m, &g, 0.5, FinslerVariant::Rigid, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status(), ConeStatus::Optimal, "kkt {:?}", sol.cone.kkt);
        let ops = RigidityOperators::new(&c);
        let scale = sol.field.iter().map(|v| v.norm()).fold(0.0, f64::max) * 24.0;
        for l in ops.op_l(&sol.field).unwrap() {
            assert!(l.abs() <= 1e-6 * scale.max(1.0), "L = {l}");
        }
        let gap = deviation_gap(&c, &m, &sol.field, &g, 0.5).unwrap();
        assert!(gap.lhs <= gap.rhs * (1.0 + 1e-6));
        let v = ops.penalty_v(&sol.field).unwrap();
        assert_abs_diff_eq!(sol.objective, v, epsilon = 1e-6 * (1.0 + v));
    }

    #[test]
    fn similarity_relaxes_rigid() {
        let c = wobbly(20, 5);
        let m = c.metrics();
        let g = random_field(20, 6);
        let rigid = solve_finsler(&c, &m, &g, 0.5, FinslerVariant::Rigid, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let simil = solve_finsler(&c, &m, &g, 0.5, FinslerVariant::Similarity { lambda: 100.0 }, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(simil.status(), ConeStatus::Optimal, "kkt {:?}", simil.cone.kkt);
        assert!(simil.objective <= rigid.objective + 1e-6);
        let ops = RigidityOperators::new(&c);
        let tvk = ops.penalty_tvk(&simil.field).unwrap();
        assert_abs_diff_eq!(simil.objective, tvk, epsilon = 1e-6 * (1.0 + tvk));
        assert!(ops.l1_l(&simil.field).unwrap() <= 100.0 * (1.0 + 1e-6));
    }

    #[test]
    fn similarity_gradient_is_reproduced() {
        let c = wobbly(16, 7);
        let m = c.metrics();
        let g = similarity_field(&c, 0.5, 0.2, Vec2::new(0.1, 0.0));
        let sol = solve_finsler(&c, &m, &g, 0.9, FinslerVariant::Similarity { lambda: 50.0 }, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(sol.objective.abs() < 1e-6);
    }

    #[test]
    fn scaling_covariance() {
        let c = wobbly(16, 8);
        let m = c.metrics();
        let g = random_field(16, 9);
        let g3: Vec<Vec2> = g.iter().map(|&v| v * 3.0).collect();
        let a = solve_finsler(&c, &m, &g, 0.6, FinslerVariant::Rigid, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = solve_finsler(&c, &m, &g3, 0.6, FinslerVariant::Rigid, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_abs_diff_eq!(b.objective, 3.0 * a.objective, epsilon = 1e-6 * (1.0 + b.objective));
    }

    #[test]
    fn zero_objective_shortcut_matches_interior_point() {
        let c = wobbly(20, 12);
        let m = c.metrics();
        let mut g = rigid_field(&c, 0.6, Vec2::new(0.2, 0.1));
        let noise = random_field(20, 13);
        for (v, e) in g.iter_mut().zip(&noise) {
            *v += *e * 0.05;
        }
        for variant in [FinslerVariant::Rigid, FinslerVariant::Similarity { lambda: 5.0 }] {
            let fp = build_finsler_program(&c, &m, &g, 0.8, variant).unwrap();
            let short = fp.zero_objective_solution().expect("rigid field is feasible");
            assert_eq!(short.status, ConeStatus::Optimal, "{:?}", short.kkt);
            assert!(short.kkt.max() < 1e-12);
            assert!(fp.program.max_violation(&short.z) < 1e-12);
            let ipm = solve(&fp.program, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(ipm.objective.abs() < 1e-6);
            assert!(short.objective.abs() < 1e-12);
        }
    }

    #[test]
    fn shortcut_declines_when_rigid_fields_are_too_far() {
        let c = wobbly(20, 14);
        let m = c.metrics();
        let g = random_field(20, 15);
        let fp = build_finsler_program(&c, &m, &g, 0.2, FinslerVariant::Rigid).unwrap();
        assert!(fp.zero_objective_solution().is_none());
        let sol = solve_program(&fp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(sol.objective > 1e-3);
        assert_ne!(sol.cone.backend_status, "ZeroObjectiveSubspace");
    }

    #[test]
    fn small_dense_solve() {
        let a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let x = solve_small(a, vec![1.0, 2.0, 3.0]).unwrap();
        let r = [4.0 * x[0] + x[1] - 1.0, x[0] + 3.0 * x[1] + x[2] - 2.0, x[1] + 2.0 * x[2] - 3.0];
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        assert!(solve_small(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn angle_cone_enforces_the_angle_condition() {
        let c = wobbly(24, 16);
        let m = c.metrics();
        let noise = random_field(24, 17);
        let g: Vec<Vec2> = c.nodes().iter().zip(&noise).map(|(p, e)| *p + *e * 0.6).collect();
        let rho = 0.7;
        let opts = ProgramOptions { angle_cone: true };
        let sol = solve_finsler_with(&c, &m, &g, rho, FinslerVariant::Rigid, opts, DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap();
        assert_eq!(sol.status(), ConeStatus::Optimal);
        let cos = crate::curve::inner_h1(&m, &sol.field, &g) / (m.h1_norm(&sol.field) * m.h1_norm(&g));
        assert!(cos >= 1.0 - rho - 1e-6, "cos {cos}");
        let plain = solve_finsler(&c, &m, &g, rho, FinslerVariant::Rigid, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(sol.objective >= plain.objective - 1e-6);
    }

    #[test]
    fn text_dump_of_small_program() {
        let c = wobbly(4, 10);
        let m = c.metrics();
        let g = random_field(4, 11);
        let fp = build_finsler_program(&c, &m, &g, 0.5, FinslerVariant::Rigid).unwrap();
        let text = fp.program.to_text();
        assert_eq!(text.matches("\nrquad ").count(), 4);
        assert_eq!(text.matches("\nle ").count(), 2 * 4 + 1);
        assert_eq!(text.matches("\neq ").count(), 4 + 2 * 4);
        let opts = ProgramOptions { angle_cone: true };
        let fp = build_finsler_program_with(&c, &m, &g, 0.5, FinslerVariant::Rigid, opts).unwrap();
        let text = fp.program.to_text();
        // L rows, S rows, W Φ rows and the angle bound.
        assert_eq!(text.matches("\neq ").count(), 4 + 2 * 4 + 2 * 4 + 1);
        assert_eq!(text.matches("\nsoc ").count(), 1);
    }
}
