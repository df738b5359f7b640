//! Linear description of occupancy polytopes on triples.

use crate::cmdp::{Layout, Transitions};
use crate::feasible::ConfidenceModel;

/// Entries below this are treated as the trivial bound 0 (or 1 for uppers).
const TRIVIAL_BOUND: f64 = 1e-15;
/// A lower bound within this of the one implied by the other upper bounds is dropped.
const IMPLIED_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, v)| v * x[i]).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i] += v;
        }
        out
    }
}

/// `eq · x = eq_rhs`, `ineq · x <= ineq_rhs` (`x >= 0` is implicit for every solver).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearConstraints {
    pub n: usize,
    pub eq: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
    pub ineq: Vec<SparseRow>,
    pub ineq_rhs: Vec<f64>,
}

impl LinearConstraints {
    pub fn push_eq(&mut self, row: SparseRow, rhs: f64) {
        self.eq.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn push_ineq(&mut self, row: SparseRow, rhs: f64) {
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn max_eq_residual(&self, x: &[f64]) -> f64 {
        self.eq
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (r.dot(x) - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_ineq_violation(&self, x: &[f64]) -> f64 {
        self.ineq
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(r, h)| (r.dot(x) - h).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Conditions (i)-(ii) on triples: unit mass leaving `x_0`, flow conservation elsewhere.
pub fn flow_constraints(layout: &Layout) -> LinearConstraints {
    let mut cons = LinearConstraints {
        n: layout.n_triples(),
        ..Default::default()
    };
    let x0 = layout.initial_state();
    let rows = layout.state_rows(x0);
    cons.push_eq(
        SparseRow {
            idx: rows.clone().collect(),
            val: vec![1.0; rows.len()],
        },
        1.0,
    );
    for k in 1..layout.n_layers() {
        for &x in layout.layer(k) {
            let mut row = SparseRow::default();
            for t in layout.state_rows(x) {
                row.idx.push(t);
                row.val.push(1.0);
            }
            let pos = layout.position(x);
            for &y in layout.layer(k - 1) {
                for a in 0..layout.n_actions() {
                    row.idx.push(layout.triple(y, a, pos));
                    row.val.push(-1.0);
                }
            }
            cons.push_eq(row, 0.0);
        }
    }
    cons
}

/// `Δ(𝒫)`: flow constraints plus, per row, `lower q(x,a) <= q(x,a,x') <= upper q(x,a)`.
///
/// Bounds that are implied by `q >= 0` or by the row sum are skipped; rows whose
/// bounds coincide become equalities.
pub fn confidence_polytope(layout: &Layout, model: &ConfidenceModel) -> LinearConstraints {
    let mut cons = flow_constraints(layout);
    let lower = model.lower();
    let upper = model.upper();
    for (x, a) in layout.active_pairs() {
        let row = layout.row(x, a);
        if row.len() < 2 {
            continue;
        }
        let fixed = row.clone().all(|t| upper[t] - lower[t] <= TRIVIAL_BOUND);
        for t in row.clone() {
            if fixed {
                if t + 1 < row.end {
                    cons.push_eq(ratio_row(row.clone(), t, upper[t]), 0.0);
                }
                continue;
            }
            if upper[t] < 1.0 - TRIVIAL_BOUND {
                cons.push_ineq(ratio_row(row.clone(), t, upper[t]), 0.0);
            }
            // the other rows' upper bounds already force this one
            let implied: f64 = 1.0 - row.clone().filter(|&o| o != t).map(|o| upper[o]).sum::<f64>();
            if lower[t] > TRIVIAL_BOUND && lower[t] > implied + IMPLIED_SLACK {
                let mut r = ratio_row(row.clone(), t, lower[t]);
                r.val.iter_mut().for_each(|v| *v = -*v);
                cons.push_ineq(r, 0.0);
            }
        }
    }
    cons
}

/// Polytope of occupancies consistent with a single known transition function.
pub fn fixed_transition_polytope(layout: &Layout, transitions: &Transitions) -> LinearConstraints {
    let visits = vec![1; layout.n_pairs()];
    let model = ConfidenceModel::from_parts(
        layout,
        transitions.0.clone(),
        vec![0.0; layout.n_pairs()],
        visits,
    );
    confidence_polytope(layout, &model)
}

/// `q(x,a,x') - ratio * Σ_{x''} q(x,a,x'')` over one row.
fn ratio_row(row: std::ops::Range<usize>, target: usize, ratio: f64) -> SparseRow {
    let mut r = SparseRow::default();
    for t in row {
        r.idx.push(t);
        r.val.push(if t == target { 1.0 - ratio } else { -ratio });
    }
    r
}

/// Lifts a pair-indexed linear functional to triples by copying along each row.
pub fn lift_to_triples(layout: &Layout, pair_values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layout.n_triples()];
    for (x, a) in layout.active_pairs() {
        let v = pair_values[layout.pair(x, a)];
        for t in layout.row(x, a) {
            out[t] = v;
        }
    }
    out
}

/// Dense constraint row `Σ_z c(pair(z)) q_z`.
pub fn pair_functional_row(layout: &Layout, pair_values: &[f64]) -> SparseRow {
    let lifted = lift_to_triples(layout, pair_values);
    SparseRow {
        idx: (0..lifted.len()).collect(),
        val: lifted,
    }
}
