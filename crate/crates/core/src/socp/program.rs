use std::fmt::Write as _;

use crate::error::{FinslerError, Result};

/// Sparse linear form `Σ coeff · z[index]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, index: usize, coeff: f64) -> Self {
        self.push(index, coeff);
        self
    }

    pub fn push(&mut self, index: usize, coeff: f64) {
        if coeff != 0.0 {
            self.entries.push((index, coeff));
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, a)| a * z[j]).sum()
    }

    /// Sorts by index and merges repeated indices.
    pub fn compress(&mut self) {
        self.entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(j, a) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => out.push((j, a)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        self.entries = out;
    }
}

/// Cone constraint over program variables.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeBlock {
    /// `|z[s]|₂² ≤ z[t]`.
    RotatedUnit { s: Vec<usize>, t: usize },
    /// `|z[s]|₂ ≤ z[t]`.
    SecondOrder { s: Vec<usize>, t: usize },
}

impl ConeBlock {
    pub fn t(&self) -> usize {
        match self {
            ConeBlock::RotatedUnit { t, .. } | ConeBlock::SecondOrder { t, .. } => *t,
        }
    }

    pub fn s(&self) -> &[usize] {
        match self {
            ConeBlock::RotatedUnit { s, .. } | ConeBlock::SecondOrder { s, .. } => s,
        }
    }

    /// Amount by which `z` violates the block (0 when inside).
    pub fn violation(&self, z: &[f64]) -> f64 {
        let sq: f64 = self.s().iter().map(|&j| z[j] * z[j]).sum();
        match self {
            ConeBlock::RotatedUnit { t, .. } => (sq - z[*t]).max(0.0),
            ConeBlock::SecondOrder { t, .. } => (sq.sqrt() - z[*t]).max(0.0),
        }
    }
}

/// `min cᵀz  s.t.  A z = b,  G z ≤ h,  z in every cone block`.
#[derive(Debug, Clone, Default)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_rows: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
    pub ineq_rows: Vec<SparseRow>,
    pub ineq_rhs: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    pub var_names: Vec<String>,
}

impl ConeProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            var_names: (0..num_vars).map(|j| format!("z{j}")).collect(),
            ..Self::default()
        }
    }

    /// Appends `count` variables named `prefix[k]` and returns the first index.
    pub fn add_vars(&mut self, prefix: &str, count: usize) -> usize {
        let start = self.num_vars;
        self.num_vars += count;
        self.objective.resize(self.num_vars, 0.0);
        self.var_names
            .extend((0..count).map(|k| format!("{prefix}[{k}]")));
        start
    }

    pub fn add_eq(&mut self, mut row: SparseRow, rhs: f64) {
        row.compress();
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, mut row: SparseRow, rhs: f64) {
        row.compress();
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn add_cone(&mut self, block: ConeBlock) {
        self.cones.push(block);
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Checks index ranges, finiteness and disjointness of cone `t` indices.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        let bad = |msg: String| Err(FinslerError::InvalidParameter(msg));
        if self.objective.len() != n {
            return bad(format!("objective has {} entries for {n} variables", self.objective.len()));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.ineq_rows.len() != self.ineq_rhs.len() {
            return bad("row and right-hand side counts differ".into());
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return bad("objective is not finite".into());
        }
        for (rows, rhs) in [(&self.eq_rows, &self.eq_rhs), (&self.ineq_rows, &self.ineq_rhs)] {
            for (row, b) in rows.iter().zip(rhs) {
                if !b.is_finite() {
                    return bad("right-hand side is not finite".into());
                }
                for &(j, a) in &row.entries {
                    if j >= n || !a.is_finite() {
                        return bad(format!("bad row entry ({j}, {a})"));
                    }
                }
            }
        }
        let mut seen_t = vec![false; n];
        for block in &self.cones {
            let t = block.t();
            if t >= n || block.s().iter().any(|&j| j >= n || j == t) {
                return bad(format!("cone block index out of range: {block:?}"));
            }
            if seen_t[t] {
                return bad(format!("cone blocks share the bound variable {t}"));
            }
            seen_t[t] = true;
        }
        Ok(())
    }

    /// Largest violation of any constraint at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (r.eval(z) - b).abs());
        let ineq = self
            .ineq_rows
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(r, h)| (r.eval(z) - h).max(0.0));
        let cones = self.cones.iter().map(|c| c.violation(z));
        eq.chain(ineq).chain(cones).fold(0.0, f64::max)
    }

    /// Plain-text dump: one line per objective term, row and cone block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_row = |row: &SparseRow| {
            row.entries
                .iter()
                .map(|&(j, a)| format!("{a:+.17e} {}", self.var_names[j]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "vars {}", self.num_vars);
        for (j, name) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "var {j} {name}");
        }
        let obj = SparseRow {
            entries: self
                .objective
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, &c)| (j, c))
                .collect(),
        };
        let _ = writeln!(out, "minimize {}", fmt_row(&obj));
        for (row, b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            let _ = writeln!(out, "eq {} = {b:+.17e}", fmt_row(row));
        }
        for (row, h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            let _ = writeln!(out, "le {} <= {h:+.17e}", fmt_row(row));
        }
        for block in &self.cones {
            let names: Vec<&str> = block.s().iter().map(|&j| self.var_names[j].as_str()).collect();
            let (kind, rel) = match block {
                ConeBlock::RotatedUnit { .. } => ("rquad", "sumsq <="),
                ConeBlock::SecondOrder { .. } => ("soc", "norm <="),
            };
            let _ = writeln!(
                out,
                "{kind} {} {rel} {}",
                names.join(" "),
                self.var_names[block.t()]
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_compress() {
        let mut r = SparseRow::new().with(3, 1.0).with(1, 2.0).with(3, -1.0).with(1, 0.5);
        r.compress();
        assert_eq!(r.entries, vec![(1, 2.5)]);
    }

    #[test]
    fn validation() {
        let mut p = ConeProgram::new(3);
        p.add_cone(ConeBlock::RotatedUnit { s: vec![0, 1], t: 2 });
        assert!(p.validate().is_ok());
        p.add_cone(ConeBlock::SecondOrder { s: vec![0], t: 2 });
        assert!(p.validate().is_err());
        let mut q = ConeProgram::new(2);
        q.add_eq(SparseRow::new().with(5, 1.0), 0.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn violations() {
        let mut p = ConeProgram::new(3);
        p.add_eq(SparseRow::new().with(0, 1.0), 2.0);
        p.add_le(SparseRow::new().with(1, 1.0), 0.0);
        p.add_cone(ConeBlock::RotatedUnit { s: vec![0], t: 2 });
        assert_eq!(p.max_violation(&[2.0, -1.0, 4.0]), 0.0);
        assert_eq!(p.max_violation(&[2.0, -1.0, 3.0]), 1.0);
        assert_eq!(p.max_violation(&[2.0, 0.5, 4.0]), 0.5);
    }

    #[test]
    fn text_dump_lists_everything() {
        let mut p = ConeProgram::new(0);
        let x = p.add_vars("x", 2);
        let t = p.add_vars("t", 1);
        p.objective[t] = 1.0;
        p.add_eq(SparseRow::new().with(x, 1.0), 1.0);
        p.add_le(SparseRow::new().with(x + 1, -1.0), 0.0);
        p.add_cone(ConeBlock::RotatedUnit { s: vec![x, x + 1], t });
        let text = p.to_text();
        assert!(text.contains("minimize +1.00000000000000000e0 t[0]"));
        assert!(text.contains("eq +1.00000000000000000e0 x[0] = +1.00000000000000000e0"));
        assert!(text.contains("rquad x[0] x[1] sumsq <= t[0]"));
        assert_eq!(text.lines().count(), 1 + 3 + 1 + 1 + 1 + 1);
    }
}
