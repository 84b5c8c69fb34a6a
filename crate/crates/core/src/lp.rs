//! Dense two-phase primal simplex for small and medium linear programs.
//!
//! Problems are stated as `min` or `max` of `c . x` subject to rows of the
//! form `a . x (<=|>=|=) b` and `x >= 0`. The tableau is kept dense and
//! row-major. Pricing is Dantzig's most-negative reduced cost; after a run of
//! degenerate pivots the solver switches to Bland's smallest-index rule until
//! the objective moves again, which rules out cycling.
//!
//! Phase 1 uses one composite artificial column shared by every `<=` row with
//! a negative right-hand side (after `>=` rows are negated into `<=` form),
//! plus one artificial per equality row. A single pivot on the composite
//! column makes the starting basis feasible.

use thiserror::Error;

/// Pivot elements smaller than this are never selected.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced costs must be below `-OPT_TOL` to enter.
const OPT_TOL: f64 = 1e-10;
/// Largest phase-1 objective still accepted as feasible.
const FEAS_TOL: f64 = 1e-9;
/// Largest constraint violation tolerated when the final point is checked
/// against the original rows.
pub const SOLUTION_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before Bland's rule takes over.
const DEGENERATE_RUN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible ({rows} rows x {cols} columns)")]
    Infeasible { rows: usize, cols: usize },
    #[error("linear program is unbounded ({rows} rows x {cols} columns)")]
    Unbounded { rows: usize, cols: usize },
    #[error("simplex iteration limit reached ({rows} rows x {cols} columns)")]
    IterationLimit { rows: usize, cols: usize },
    #[error("numerical breakdown ({rows} rows x {cols} columns): {detail}")]
    Numerical {
        rows: usize,
        cols: usize,
        detail: String,
    },
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    sense: Sense,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(n_vars: usize, sense: Sense, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), n_vars, "objective length");
        LinearProgram {
            n_vars,
            objective,
            sense,
            constraints: Vec::new(),
        }
    }

    /// A problem with a zero objective, for pure feasibility checks.
    pub fn feasibility(n_vars: usize) -> Self {
        Self::new(n_vars, Sense::Minimize, vec![0.0; n_vars])
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars, "constraint length");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let mut tab = Tableau::build(self);
        let rows = self.constraints.len();
        let cols = self.n_vars;

        if tab.has_artificials() {
            tab.enter_composite();
            let phase1: Vec<f64> = (0..tab.ncols)
                .map(|j| if tab.is_artificial(j) { 1.0 } else { 0.0 })
                .collect();
            tab.set_costs(&phase1);
            tab.run(false)?;
            if tab.objective_value() > FEAS_TOL {
                return Err(LpError::Infeasible { rows, cols });
            }
            tab.drive_out_artificials();
        }

        let mut costs = vec![0.0; tab.ncols];
        for (j, &c) in self.objective.iter().enumerate() {
            costs[j] = match self.sense {
                Sense::Minimize => c,
                Sense::Maximize => -c,
            };
        }
        tab.set_costs(&costs);
        tab.run(true)?;

        let x = tab.primal(self.n_vars);
        self.verify(&x)?;
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: tab.pivots,
        })
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    fn verify(&self, x: &[f64]) -> Result<(), LpError> {
        let v = self.max_violation(x);
        if v > SOLUTION_TOL || !v.is_finite() {
            return Err(LpError::Numerical {
                rows: self.constraints.len(),
                cols: self.n_vars,
                detail: format!("final point violates constraints by {v:.3e}"),
            });
        }
        Ok(())
    }
}

struct Tableau {
    /// Row-major `m x (ncols + 1)`; the last column is the right-hand side.
    t: Vec<f64>,
    m: usize,
    ncols: usize,
    /// Reduced costs, with `-objective` in the last slot.
    d: Vec<f64>,
    basis: Vec<usize>,
    /// First artificial column; everything at or beyond it is artificial.
    first_artificial: usize,
    composite: Option<usize>,
    n_struct: usize,
    pivots: usize,
    scratch: Vec<f64>,
    nz: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars;
        let m = lp.constraints.len();
        // Normalize to `<=` rows (slack) and equality rows (artificial).
        let mut le_rows = 0;
        let mut neg_le = false;
        for c in &lp.constraints {
            match c.relation {
                Relation::Le => {
                    le_rows += 1;
                    neg_le |= c.rhs < 0.0;
                }
                Relation::Ge => {
                    le_rows += 1;
                    neg_le |= -c.rhs < 0.0;
                }
                Relation::Eq => {}
            }
        }
        let eq_rows = m - le_rows;
        let first_artificial = n + le_rows;
        let composite = neg_le.then_some(first_artificial);
        let ncols = first_artificial + usize::from(neg_le) + eq_rows;
        let w = ncols + 1;
        let mut t = vec![0.0; m * w];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_artificial + usize::from(neg_le);
        for (i, c) in lp.constraints.iter().enumerate() {
            let row = &mut t[i * w..(i + 1) * w];
            match c.relation {
                Relation::Le | Relation::Ge => {
                    let sign = if c.relation == Relation::Le { 1.0 } else { -1.0 };
                    for (dst, &a) in row[..n].iter_mut().zip(&c.coeffs) {
                        *dst = sign * a;
                    }
                    let b = sign * c.rhs;
                    row[slack] = 1.0;
                    row[ncols] = b;
                    if b < 0.0 {
                        row[first_artificial] = -1.0;
                    }
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Eq => {
                    let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
                    for (dst, &a) in row[..n].iter_mut().zip(&c.coeffs) {
                        *dst = sign * a;
                    }
                    row[art] = 1.0;
                    row[ncols] = sign * c.rhs;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            t,
            m,
            ncols,
            d: vec![0.0; w],
            basis,
            first_artificial,
            composite,
            n_struct: n,
            pivots: 0,
            scratch: vec![0.0; w],
            nz: Vec::with_capacity(w),
        }
    }

    fn width(&self) -> usize {
        self.ncols + 1
    }

    fn has_artificials(&self) -> bool {
        self.ncols > self.first_artificial
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width() + self.ncols]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    /// Pivot the composite artificial into the most infeasible row.
    fn enter_composite(&mut self) {
        let Some(col) = self.composite else { return };
        let mut row = None;
        let mut most = 0.0;
        for i in 0..self.m {
            let b = self.rhs(i);
            if b < most {
                most = b;
                row = Some(i);
            }
        }
        if let Some(r) = row {
            self.pivot(r, col);
        }
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.width();
        self.d.iter_mut().for_each(|v| *v = 0.0);
        self.d[..self.ncols].copy_from_slice(costs);
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..(i + 1) * w];
                for (dv, &tv) in self.d.iter_mut().zip(row) {
                    *dv -= cb * tv;
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        -self.d[self.ncols]
    }

    fn run(&mut self, forbid_artificials: bool) -> Result<(), LpError> {
        let limit = 50 * (self.m + self.ncols) + 1000;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > limit {
                return Err(LpError::IterationLimit {
                    rows: self.m,
                    cols: self.n_struct,
                });
            }
            let allowed = if forbid_artificials {
                self.first_artificial
            } else {
                self.ncols
            };
            let Some(col) = self.price(allowed, bland) else {
                return Ok(());
            };
            let Some((row, ratio)) = self.ratio_test(col) else {
                return Err(LpError::Unbounded {
                    rows: self.m,
                    cols: self.n_struct,
                });
            };
            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.pivot(row, col);
            if !self.d[self.ncols].is_finite() {
                return Err(LpError::Numerical {
                    rows: self.m,
                    cols: self.n_struct,
                    detail: "non-finite objective".into(),
                });
            }
        }
    }

    fn price(&self, allowed: usize, bland: bool) -> Option<usize> {
        let d = &self.d[..allowed];
        if bland {
            return d.iter().position(|&v| v < -OPT_TOL);
        }
        let mut best = None;
        let mut most = -OPT_TOL;
        for (j, &v) in d.iter().enumerate() {
            if v < most {
                most = v;
                best = Some(j);
            }
        }
        best
    }

    fn ratio_test(&self, col: usize) -> Option<(usize, f64)> {
        let w = self.width();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.t[i * w + col];
            if a > PIVOT_TOL {
                let r = (self.t[i * w + self.ncols] / a).max(0.0);
                match best {
                    None => best = Some((i, r)),
                    Some((bi, br)) => {
                        let tie = (r - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if r < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            best = Some((i, r));
                        }
                    }
                }
            }
        }
        best
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let piv = self.t[row * w + col];
        {
            let prow = &mut self.t[row * w..(row + 1) * w];
            let inv = 1.0 / piv;
            for v in prow.iter_mut() {
                *v *= inv;
            }
            prow[col] = 1.0;
        }
        self.scratch.copy_from_slice(&self.t[row * w..(row + 1) * w]);
        self.nz.clear();
        self.nz
            .extend((0..w).filter(|&j| self.scratch[j] != 0.0));
        let sparse = self.nz.len() * 3 < w;

        let (scratch, nz) = (&self.scratch, &self.nz);
        for (i, r) in self.t.chunks_exact_mut(w).enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f == 0.0 {
                continue;
            }
            axpy(r, f, scratch, nz, sparse);
            r[col] = 0.0;
        }
        let f = self.d[col];
        if f != 0.0 {
            axpy(&mut self.d, f, scratch, nz, sparse);
            self.d[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// After phase 1, replace artificials still in the basis (at zero level).
    /// Rows where no structural or slack column can take over are redundant
    /// and are dropped.
    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.m {
            if self.is_artificial(self.basis[i]) {
                let mut best = None;
                let mut mag = PIVOT_TOL;
                for j in 0..self.first_artificial {
                    let a = self.at(i, j).abs();
                    if a > mag {
                        mag = a;
                        best = Some(j);
                    }
                }
                match best {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.remove_row(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.width();
        self.t.drain(i * w..(i + 1) * w);
        self.basis.remove(i);
        self.m -= 1;
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        x
    }
}

#[inline]
fn axpy(r: &mut [f64], f: f64, src: &[f64], nz: &[usize], sparse: bool) {
    if sparse {
        for &j in nz {
            r[j] -= f * src[j];
        }
    } else {
        for (x, &y) in r.iter_mut().zip(src) {
            *x -= f * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2, Sense::Maximize, vec![3.0, 5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, 36.0));
        assert!(close(s.x[0], 2.0) && close(s.x[1], 6.0));
    }

    #[test]
    fn needs_phase_one() {
        // min x + y, x + y >= 2, x - y = 0.5
        let mut lp = LinearProgram::new(2, Sense::Minimize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 2.0);
        lp.add_constraint(vec![1.0, -1.0], Relation::Eq, 0.5);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, 2.0));
        assert!(close(s.x[0], 1.25) && close(s.x[1], 0.75));
    }

    #[test]
    fn negative_rhs_equality() {
        let mut lp = LinearProgram::new(2, Sense::Minimize, vec![1.0, 0.0]);
        lp.add_constraint(vec![-1.0, -1.0], Relation::Eq, -3.0);
        lp.add_constraint(vec![0.0, 1.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, 2.0));
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::feasibility(1);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Infeasible { .. })));
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(2, Sense::Maximize, vec![1.0, 0.0]);
        lp.add_constraint(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Unbounded { .. })));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(2, Sense::Maximize, vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, 2.0));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example under Dantzig pricing.
        let mut lp = LinearProgram::new(4, Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!(close(s.objective, -0.05));
    }
}
