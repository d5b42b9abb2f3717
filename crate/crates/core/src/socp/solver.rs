//! Interior-point backend and an independent KKT check.
//!
//! Programs are rewritten in the conic standard form `A x + s = b`,
//! `s ∈ K` with `K` a product of zero, nonnegative and Lorentz cones. The
//! rotated block `|z_s|² ≤ z_t` becomes `|(z_t - 1, 2 z_s)| ≤ z_t + 1`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::program::{ConeBlock, ConeProgram, SparseRow};
use crate::error::{FinslerError, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
}

/// Relative KKT residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub z: Vec<f64>,
    /// Multipliers of the standard-form rows (equalities, inequalities, cones).
    pub dual: Vec<f64>,
    pub status: ConeStatus,
    pub kkt: KktResiduals,
    pub iterations: u32,
    pub objective: f64,
    /// Termination reason reported by the interior-point backend.
    pub backend_status: String,
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Zero(usize),
    Nonneg(usize),
    Lorentz(usize),
}

/// Standard form `A x + s = b`, `s ∈ K`.
struct StandardForm {
    rows: Vec<SparseRow>,
    b: Vec<f64>,
    blocks: Vec<Block>,
}

impl StandardForm {
    fn from_program(p: &ConeProgram) -> Self {
        let mut rows = Vec::new();
        let mut b = Vec::new();
        let mut blocks = Vec::new();
        if !p.eq_rows.is_empty() {
            rows.extend(p.eq_rows.iter().cloned());
            b.extend(&p.eq_rhs);
            blocks.push(Block::Zero(p.eq_rows.len()));
        }
        if !p.ineq_rows.is_empty() {
            rows.extend(p.ineq_rows.iter().cloned());
            b.extend(&p.ineq_rhs);
            blocks.push(Block::Nonneg(p.ineq_rows.len()));
        }
        for cone in &p.cones {
            match cone {
                ConeBlock::SecondOrder { s, t } => {
                    rows.push(SparseRow::new().with(*t, -1.0));
                    b.push(0.0);
                    for &j in s {
                        rows.push(SparseRow::new().with(j, -1.0));
                        b.push(0.0);
                    }
                    blocks.push(Block::Lorentz(s.len() + 1));
                }
                ConeBlock::RotatedUnit { s, t } => {
                    rows.push(SparseRow::new().with(*t, -1.0));
                    b.push(1.0);
                    rows.push(SparseRow::new().with(*t, -1.0));
                    b.push(-1.0);
                    for &j in s {
                        rows.push(SparseRow::new().with(j, -2.0));
                        b.push(0.0);
                    }
                    blocks.push(Block::Lorentz(s.len() + 2));
                }
            }
        }
        Self { rows, b, blocks }
    }

    fn csc(&self, n: usize) -> CscMatrix<f64> {
        let mut ii = Vec::new();
        let mut jj = Vec::new();
        let mut vv = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.entries {
                ii.push(i);
                jj.push(j);
                vv.push(a);
            }
        }
        CscMatrix::new_from_triplets(self.rows.len(), n, ii, jj, vv)
    }

    fn cones(&self) -> Vec<SupportedConeT<f64>> {
        self.blocks
            .iter()
            .map(|b| match *b {
                Block::Zero(d) => SupportedConeT::ZeroConeT(d),
                Block::Nonneg(d) => SupportedConeT::NonnegativeConeT(d),
                Block::Lorentz(d) => SupportedConeT::SecondOrderConeT(d),
            })
            .collect()
    }

    /// Violation of `v ∈ K` (`dual = false`) or of `v ∈ K*` (`dual = true`).
    fn cone_violation(&self, v: &[f64], dual: bool) -> f64 {
        let mut off = 0;
        let mut worst = 0.0f64;
        for block in &self.blocks {
            match *block {
                Block::Zero(d) => {
                    if !dual {
                        for x in &v[off..off + d] {
                            worst = worst.max(x.abs());
                        }
                    }
                    off += d;
                }
                Block::Nonneg(d) => {
                    for x in &v[off..off + d] {
                        worst = worst.max(-x);
                    }
                    off += d;
                }
                Block::Lorentz(d) => {
                    let tail: f64 = v[off + 1..off + d].iter().map(|x| x * x).sum::<f64>().sqrt();
                    worst = worst.max(tail - v[off]);
                    off += d;
                }
            }
        }
        worst
    }
}

/// Offsets of the constraint groups inside the dual vector of a
/// [`ConeSolution`]: equalities start at 0, inequalities at `ineq`, cone block
/// `k` at `cones[k]`; `len` is the total length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualLayout {
    pub ineq: usize,
    pub cones: Vec<usize>,
    pub len: usize,
}

pub fn dual_layout(p: &ConeProgram) -> DualLayout {
    let ineq = p.eq_rows.len();
    let mut off = ineq + p.ineq_rows.len();
    let mut cones = Vec::with_capacity(p.cones.len());
    for c in &p.cones {
        cones.push(off);
        off += match c {
            ConeBlock::SecondOrder { s, .. } => s.len() + 1,
            ConeBlock::RotatedUnit { s, .. } => s.len() + 2,
        };
    }
    DualLayout { ineq, cones, len: off }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative KKT residuals of a primal-dual pair in standard form.
///
/// * primal: `max(|b - A x - s|, dist(s, K))` with `s = b - A x`, over `1 + ‖b‖∞`
/// * dual: `max(‖c + Aᵀ y‖∞, dist(y, K*))` over `1 + ‖c‖∞`
/// * gap: `|cᵀx + bᵀy|` over `1 + |cᵀx| + |bᵀy|`
pub fn check_kkt(p: &ConeProgram, z: &[f64], dual: &[f64]) -> Result<KktResiduals> {
    let form = StandardForm::from_program(p);
    if z.len() != p.num_vars {
        return Err(FinslerError::SizeMismatch { expected: p.num_vars, found: z.len() });
    }
    if dual.len() != form.rows.len() {
        return Err(FinslerError::SizeMismatch { expected: form.rows.len(), found: dual.len() });
    }
    let slack: Vec<f64> = form
        .rows
        .iter()
        .zip(&form.b)
        .map(|(r, b)| b - r.eval(z))
        .collect();
    let primal = form.cone_violation(&slack, false).max(0.0) / (1.0 + inf_norm(&form.b));

    let mut reduced = p.objective.clone();
    for (row, y) in form.rows.iter().zip(dual) {
        for &(j, a) in &row.entries {
            reduced[j] += a * y;
        }
    }
    let dual_res = inf_norm(&reduced).max(form.cone_violation(dual, true).max(0.0))
        / (1.0 + inf_norm(&p.objective));

    let cx = p.objective_value(z);
    let by: f64 = form.b.iter().zip(dual).map(|(b, y)| b * y).sum();
    let gap = (cx + by).abs() / (1.0 + cx.abs() + by.abs());
    Ok(KktResiduals { primal, dual: dual_res, gap })
}

/// Solves `p` with a primal-dual interior-point method.
pub fn solve(p: &ConeProgram, tol: f64, max_iter: u32) -> Result<ConeSolution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(FinslerError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let form = StandardForm::from_program(p);
    let a = form.csc(p.num_vars);
    let mut best: Option<ConeSolution> = None;
    for profile in [Profile::Default, Profile::NoEquilibration, Profile::ShortSteps] {
        let sol = run_backend(p, &form, &a, tol, max_iter, profile)?;
        let done = sol.status != ConeStatus::MaxIter;
        if best.as_ref().map_or(true, |b| sol.kkt.max() < b.kkt.max()) || done {
            best = Some(sol);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one backend run"))
}

/// Backend settings tried in turn until one certifies.
#[derive(Debug, Clone, Copy)]
enum Profile {
    Default,
    NoEquilibration,
    ShortSteps,
}

fn run_backend(
    p: &ConeProgram,
    form: &StandardForm,
    a: &CscMatrix<f64>,
    tol: f64,
    max_iter: u32,
    profile: Profile,
) -> Result<ConeSolution> {
    let n = p.num_vars;
    let pmat = CscMatrix::<f64>::zeros((n, n));
    // The backend stops on its own scaled residuals; ask for a margin below
    // `tol` so the unscaled check passes.
    let inner = (tol * 1e-2).max(1e-14);
    let mut builder = DefaultSettingsBuilder::default();
    builder
        .verbose(false)
        .max_iter(max_iter)
        .tol_gap_abs(inner)
        .tol_gap_rel(inner)
        .tol_feas(inner)
        .tol_ktratio(1e-7)
        .presolve_enable(false);
    match profile {
        Profile::Default => {}
        Profile::NoEquilibration => {
            builder.equilibrate_enable(false);
        }
        Profile::ShortSteps => {
            builder.max_step_fraction(0.9);
        }
    }
    let settings = builder.build().map_err(|e| FinslerError::Solver(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&pmat, &p.objective, a, &form.b, &form.cones(), settings);
    solver.solve();
    let sol = &solver.solution;
    let z = sol.x.clone();
    let dual = sol.z.clone();
    let kkt = check_kkt(p, &z, &dual)?;
    let status = match sol.status {
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ConeStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ConeStatus::Unbounded,
        _ if kkt.max() <= tol => ConeStatus::Optimal,
        _ => ConeStatus::MaxIter,
    };
    Ok(ConeSolution {
        objective: p.objective_value(&z),
        z,
        dual,
        status,
        kkt,
        iterations: sol.iterations,
        backend_status: format!("{:?}", sol.status),
    })
}
