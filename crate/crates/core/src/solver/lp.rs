//! Dense two-phase primal simplex for small linear programs
//!
//! ```text
//! maximize cᵀx  subject to  A_eq x = b_eq,  A_le x <= b_le,  x >= 0.
//! ```
//!
//! Pivoting uses Dantzig's rule and switches to Bland's rule after a run of
//! degenerate pivots. The leaving row comes from a Harris ratio test; ties go
//! to the lowest basis index, so the result is a deterministic function of the
//! input.

use super::polytope::LinearConstraints;
use super::SolverError;

const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: LinearConstraints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.cols + 1;
        let inv = 1.0 / self.data[pr * w + pc];
        for j in 0..w {
            self.data[pr * w + j] *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == pr {
                continue;
            }
            let f = self.data[i * w + pc];
            if f != 0.0 {
                for j in 0..w {
                    self.data[i * w + j] -= f * pivot_row[j];
                }
                self.data[i * w + pc] = 0.0;
            }
        }
        let f = obj[pc];
        if f != 0.0 {
            for j in 0..w {
                obj[j] -= f * pivot_row[j];
            }
            obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.cols + 1;
        self.data.drain(i * w..(i + 1) * w);
        self.basis.remove(i);
        self.rows -= 1;
    }

    /// Runs the simplex on reduced-cost row `obj` (entries `z_j - c_j`, rhs = current value).
    /// Columns with `allowed[j] == false` never enter.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool], max_pivots: usize) -> Result<usize, SolverError> {
        let mut pivots = 0;
        let mut degenerate = 0;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -COST_TOL;
            for j in 0..self.cols {
                if !allowed[j] || obj[j] >= -COST_TOL {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if obj[j] < best {
                    best = obj[j];
                    entering = Some(j);
                }
            }
            let Some(pc) = entering else {
                return Ok(pivots);
            };
            // Harris two-pass ratio test: bound the step with a small
            // feasibility slack, then take the largest pivot among the rows
            // that block within that bound.
            let mut bound = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL {
                    bound = bound.min((self.rhs(i).max(0.0) + HARRIS_TOL) / a);
                }
            }
            if bound == f64::INFINITY {
                return Err(SolverError::Unbounded);
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL && self.rhs(i).max(0.0) / a <= bound {
                    let better = match leave {
                        None => true,
                        Some((li, la)) => a > la || (a == la && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, a));
                    }
                }
            }
            let (pr, a) = leave.expect("a row attains the bound");
            let ratio = self.rhs(pr).max(0.0) / a;
            if ratio <= 1e-13 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc, obj);
            pivots += 1;
            if pivots > max_pivots {
                return Err(SolverError::NonConvergence {
                    iterations: pivots,
                    best: Vec::new(),
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    gap: f64::NAN,
                });
            }
        }
    }
}

/// Solves the program. `Err(Infeasible)` if no feasible point exists.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, SolverError> {
    let cons = &lp.constraints;
    let n = cons.n;
    let n_eq = cons.eq.len();
    let n_le = cons.ineq.len();
    let rows = n_eq + n_le;

    // column layout: [x (n) | slack per le row (n_le) | artificial per row (rows)]
    let slack0 = n;
    let art0 = n + n_le;
    let cols = art0 + rows;
    let w = cols + 1;
    let mut data = vec![0.0; rows * w];
    let mut needs_art = vec![false; rows];
    let mut basis = vec![0; rows];

    for (i, (row, &b)) in cons.eq.iter().zip(&cons.eq_rhs).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (&j, &v) in row.idx.iter().zip(&row.val) {
            data[i * w + j] += sign * v;
        }
        data[i * w + cols] = sign * b;
        needs_art[i] = true;
    }
    for (k, (row, &h)) in cons.ineq.iter().zip(&cons.ineq_rhs).enumerate() {
        let i = n_eq + k;
        let sign = if h < 0.0 { -1.0 } else { 1.0 };
        for (&j, &v) in row.idx.iter().zip(&row.val) {
            data[i * w + j] += sign * v;
        }
        data[i * w + slack0 + k] = sign;
        data[i * w + cols] = sign * h;
        if sign > 0.0 {
            basis[i] = slack0 + k;
        } else {
            needs_art[i] = true;
        }
    }
    for i in 0..rows {
        if needs_art[i] {
            data[i * w + art0 + i] = 1.0;
            basis[i] = art0 + i;
        }
    }
    let mut tab = Tableau {
        data,
        rows,
        cols,
        basis,
    };
    let max_pivots = 50 * (rows + cols) + 1000;
    let mut pivots = 0;

    // phase 1: maximize -Σ artificials
    let used_art: Vec<bool> = (0..cols).map(|j| j >= art0 && needs_art[j - art0]).collect();
    if used_art.iter().any(|&u| u) {
        let mut obj = vec![0.0; w];
        for j in 0..cols {
            if used_art[j] {
                obj[j] = 1.0;
            }
        }
        for i in 0..tab.rows {
            if used_art[tab.basis[i]] {
                for j in 0..w {
                    obj[j] -= tab.at(i, j);
                }
            }
        }
        let allowed: Vec<bool> = (0..cols).map(|j| j < art0 || used_art[j]).collect();
        pivots += tab.optimize(&mut obj, &allowed, max_pivots)?;
        let infeasibility = -obj[cols];
        if infeasibility > FEAS_TOL {
            return Err(SolverError::Infeasible {
                min_residual: infeasibility,
            });
        }
        // drive remaining artificials out of the basis
        let mut i = 0;
        while i < tab.rows {
            if tab.basis[i] >= art0 {
                let pc = (0..art0).find(|&j| tab.at(i, j).abs() > 1e-9);
                match pc {
                    Some(pc) => {
                        tab.pivot(i, pc, &mut obj);
                        pivots += 1;
                        i += 1;
                    }
                    None => tab.remove_row(i),
                }
            } else {
                i += 1;
            }
        }
    }

    // phase 2
    let mut obj = vec![0.0; w];
    for j in 0..n {
        obj[j] = -lp.objective[j];
    }
    for i in 0..tab.rows {
        let cb = if tab.basis[i] < n {
            lp.objective[tab.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for j in 0..w {
                obj[j] += cb * tab.at(i, j);
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < art0).collect();
    pivots += tab.optimize(&mut obj, &allowed, max_pivots)?;

    let mut x = vec![0.0; n];
    for i in 0..tab.rows {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(LpSolution { x, value, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::polytope::SparseRow;

    fn dense(v: &[f64]) -> SparseRow {
        SparseRow {
            idx: (0..v.len()).collect(),
            val: v.to_vec(),
        }
    }

    #[test]
    fn two_variable_program() {
        // max x0 s.t. x0 + x1 = 1, 0.5 x0 - 0.5 x1 <= 0
        let mut cons = LinearConstraints { n: 2, ..Default::default() };
        cons.push_eq(dense(&[1.0, 1.0]), 1.0);
        cons.push_ineq(dense(&[0.5, -0.5]), 0.0);
        let sol = solve(&LinearProgram { objective: vec![1.0, 0.0], constraints: cons }).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut cons = LinearConstraints { n: 2, ..Default::default() };
        cons.push_eq(dense(&[1.0, 1.0]), 1.0);
        cons.push_ineq(dense(&[1.0, 1.0]), 0.5);
        let err = solve(&LinearProgram { objective: vec![1.0, 0.0], constraints: cons }).unwrap_err();
        assert!(matches!(err, SolverError::Infeasible { .. }));

        let mut cons = LinearConstraints { n: 2, ..Default::default() };
        cons.push_ineq(dense(&[1.0, -1.0]), 1.0);
        let err = solve(&LinearProgram { objective: vec![1.0, 1.0], constraints: cons }).unwrap_err();
        assert_eq!(err, SolverError::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // x0 + x1 = 1 stated twice, x0 >= 0.25 written as -x0 <= -0.25; max x1
        let mut cons = LinearConstraints { n: 2, ..Default::default() };
        cons.push_eq(dense(&[1.0, 1.0]), 1.0);
        cons.push_eq(dense(&[2.0, 2.0]), 2.0);
        cons.push_ineq(dense(&[-1.0, 0.0]), -0.25);
        let sol = solve(&LinearProgram { objective: vec![0.0, 1.0], constraints: cons }).unwrap();
        assert!((sol.value - 0.75).abs() < 1e-12);
    }
}
