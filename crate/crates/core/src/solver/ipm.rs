//! Primal-dual interior-point method for
//!
//! ```text
//! minimize   Σ_z w_z x_z + x_z ln(x_z / p_z) - x_z + p_z
//! subject to A x = b,  G x <= h
//! ```
//!
//! with `p > 0`. The entropy term keeps `x` strictly positive, so `x >= 0`
//! needs no multipliers. Mehrotra predictor-corrector steps on the perturbed
//! KKT system. The Newton system is reduced to `K = diag(1/x) + Gᵀ diag(μ/s) G`
//! over the rows with moderate `μ/s`; the remaining (nearly binding) rows stay
//! in the Schur complement next to `A`, scaled by `s/μ`, so that their
//! multiplier steps do not divide by a vanishing slack. Both `K` and the Schur
//! complement are factored by Cholesky.

use nalgebra::{DMatrix, DVector};

use super::polytope::LinearConstraints;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    /// Target for `‖Ax - b‖∞` and `‖Gx + s - h‖∞`.
    pub tol_primal: f64,
    /// Target for the stationarity residual `‖∇f + Aᵀν + Gᵀμ‖∞`.
    pub tol_dual: f64,
    /// Target for the complementarity `sᵀμ`.
    pub tol_gap: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol_primal: 1e-12,
            tol_dual: 1e-10,
            tol_gap: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSolution {
    pub x: Vec<f64>,
    /// Equality multipliers `ν`.
    pub eq_mult: Vec<f64>,
    /// Inequality multipliers `μ >= 0`.
    pub ineq_mult: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub objective: f64,
    /// Lagrange dual function at `(ν, μ)`: a lower bound on the optimum.
    pub dual_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmFailure {
    pub last: IpmSolution,
}

/// KL-prox objective value.
pub fn kl_objective(linear: &[f64], anchor: &[f64], x: &[f64]) -> f64 {
    x.iter()
        .zip(anchor)
        .zip(linear)
        .map(|((&x, &p), &w)| {
            let ent = if x > 0.0 { x * (x / p).ln() } else { 0.0 };
            w * x + ent - x + p
        })
        .sum()
}

/// Closed-form dual function `Σ (p - x(ν,μ)) - bᵀν - hᵀμ`,
/// `x(ν,μ) = p ∘ exp(-w - Aᵀν - Gᵀμ)`.
pub fn kl_dual_value(
    linear: &[f64],
    anchor: &[f64],
    cons: &LinearConstraints,
    eq_mult: &[f64],
    ineq_mult: &[f64],
) -> f64 {
    let exponent = transposed_product(cons, eq_mult, ineq_mult, linear);
    let mut value: f64 = anchor
        .iter()
        .zip(&exponent)
        .map(|(&p, &e)| p - p * (-e).exp())
        .sum();
    value -= cons.eq_rhs.iter().zip(eq_mult).map(|(b, v)| b * v).sum::<f64>();
    value -= cons.ineq_rhs.iter().zip(ineq_mult).map(|(h, m)| h * m).sum::<f64>();
    value
}

/// `base + Aᵀν + Gᵀμ`.
fn transposed_product(
    cons: &LinearConstraints,
    eq_mult: &[f64],
    ineq_mult: &[f64],
    base: &[f64],
) -> Vec<f64> {
    let mut out = base.to_vec();
    for (row, &v) in cons.eq.iter().zip(eq_mult) {
        for (&i, &a) in row.idx.iter().zip(&row.val) {
            out[i] += a * v;
        }
    }
    for (row, &m) in cons.ineq.iter().zip(ineq_mult) {
        for (&i, &g) in row.idx.iter().zip(&row.val) {
            out[i] += g * m;
        }
    }
    out
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest `α <= 1` with `v + α dv >= 0` (componentwise, strict interior kept by the caller).
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).fold(1.0, |alpha: f64, (&v, &d)| {
        if d < 0.0 {
            alpha.min(-v / d)
        } else {
            alpha
        }
    })
}

struct Newton {
    dx: Vec<f64>,
    dnu: Vec<f64>,
    dmu: Vec<f64>,
    ds: Vec<f64>,
}

/// Rows whose weight `μ/s` exceeds this multiple of the entropy curvature
/// `1/x` of their entries are treated as binding.
const STIFF_RATIO: f64 = 1e8;

fn stiff_rows(x: &[f64], s: &[f64], mu: &[f64], cons: &LinearConstraints) -> Vec<bool> {
    cons.ineq
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let scale = row
                .idx
                .iter()
                .zip(&row.val)
                .map(|(&i, v)| v * v * x[i])
                .fold(0.0, f64::max);
            mu[j] / s[j] * scale > STIFF_RATIO
        })
        .collect()
}

struct Factored {
    k_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `[A; G_b]`, the equalities followed by the binding rows.
    c: DMatrix<f64>,
    k_inv_ct: DMatrix<f64>,
    schur_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    stiff: Vec<bool>,
    stiff_rows: Vec<usize>,
}

pub fn solve(
    linear: &[f64],
    anchor: &[f64],
    cons: &LinearConstraints,
    settings: &IpmSettings,
) -> Result<IpmSolution, IpmFailure> {
    let n = anchor.len();
    let p = cons.eq.len();
    let r = cons.ineq.len();
    debug_assert!(anchor.iter().all(|&v| v > 0.0));

    let a_dense = {
        let mut a = DMatrix::zeros(p, n);
        for (i, row) in cons.eq.iter().enumerate() {
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                a[(i, j)] += v;
            }
        }
        a
    };

    let mut x = anchor.to_vec();
    let mut nu = vec![0.0; p];
    let mut s: Vec<f64> = cons
        .ineq
        .iter()
        .zip(&cons.ineq_rhs)
        .map(|(row, h)| (h - row.dot(&x)).max(1.0))
        .collect();
    let mut mu = vec![1.0; r];

    let mut iterations = 0;
    loop {
        // residuals
        let grad: Vec<f64> = (0..n)
            .map(|i| linear[i] + (x[i] / anchor[i]).ln())
            .collect();
        let r_d = transposed_product(cons, &nu, &mu, &grad);
        let r_p: Vec<f64> = cons
            .eq
            .iter()
            .zip(&cons.eq_rhs)
            .map(|(row, b)| row.dot(&x) - b)
            .collect();
        let r_g: Vec<f64> = cons
            .ineq
            .iter()
            .zip(&cons.ineq_rhs)
            .zip(&s)
            .map(|((row, h), s)| row.dot(&x) + s - h)
            .collect();
        let comp: f64 = s.iter().zip(&mu).map(|(s, m)| s * m).sum();
        let primal_residual = inf_norm(&r_p).max(inf_norm(&r_g));
        let dual_residual = inf_norm(&r_d);

        let snapshot = |iterations| {
            let objective = kl_objective(linear, anchor, &x);
            IpmSolution {
                x: x.clone(),
                eq_mult: nu.clone(),
                ineq_mult: mu.clone(),
                iterations,
                primal_residual,
                dual_residual,
                gap: comp,
                objective,
                dual_value: kl_dual_value(linear, anchor, cons, &nu, &mu),
            }
        };

        if primal_residual <= settings.tol_primal
            && dual_residual <= settings.tol_dual
            && comp <= settings.tol_gap
        {
            return Ok(snapshot(iterations));
        }
        let finite = x.iter().chain(&nu).chain(&mu).all(|v| v.is_finite());
        if iterations >= settings.max_iter || !finite || !primal_residual.is_finite() || !dual_residual.is_finite() {
            return Err(IpmFailure {
                last: snapshot(iterations),
            });
        }
        iterations += 1;

        let factored = match factor(&x, &s, &mu, cons, &a_dense) {
            Some(f) => f,
            None => {
                return Err(IpmFailure {
                    last: snapshot(iterations),
                })
            }
        };

        // predictor
        let rc_aff: Vec<f64> = s.iter().zip(&mu).map(|(s, m)| s * m).collect();
        let aff = newton_step(&factored, cons, &s, &mu, &r_d, &r_p, &r_g, &rc_aff);
        let alpha_aff = max_step(&x, &aff.dx)
            .min(max_step(&s, &aff.ds))
            .min(max_step(&mu, &aff.dmu));
        let gap_aff: f64 = (0..r)
            .map(|j| (s[j] + alpha_aff * aff.ds[j]) * (mu[j] + alpha_aff * aff.dmu[j]))
            .sum();

        let step = if r > 0 {
            let mean = comp / r as f64;
            let sigma = (gap_aff / comp).powi(3).clamp(0.0, 1.0);
            let rc: Vec<f64> = (0..r)
                .map(|j| s[j] * mu[j] + aff.ds[j] * aff.dmu[j] - sigma * mean)
                .collect();
            newton_step(&factored, cons, &s, &mu, &r_d, &r_p, &r_g, &rc)
        } else {
            aff
        };

        let alpha_max = max_step(&x, &step.dx)
            .min(max_step(&s, &step.ds))
            .min(max_step(&mu, &step.dmu));
        let alpha = if alpha_max >= 1.0 { 1.0 } else { 0.99 * alpha_max };
        for i in 0..n {
            x[i] += alpha * step.dx[i];
            // keep the entropy finite under round-off
            if x[i] <= 0.0 {
                x[i] = f64::MIN_POSITIVE;
            }
        }
        for i in 0..p {
            nu[i] += alpha * step.dnu[i];
        }
        for j in 0..r {
            s[j] = (s[j] + alpha * step.ds[j]).max(f64::MIN_POSITIVE);
            mu[j] = (mu[j] + alpha * step.dmu[j]).max(f64::MIN_POSITIVE);
        }
    }
}

fn factor(
    x: &[f64],
    s: &[f64],
    mu: &[f64],
    cons: &LinearConstraints,
    a: &DMatrix<f64>,
) -> Option<Factored> {
    let stiff = stiff_rows(x, s, mu, cons);
    if stiff.iter().any(|&b| b) {
        if let Some(f) = factor_split(x, s, mu, cons, a, stiff) {
            return Some(f);
        }
    }
    factor_split(x, s, mu, cons, a, vec![false; s.len()])
}

fn factor_split(
    x: &[f64],
    s: &[f64],
    mu: &[f64],
    cons: &LinearConstraints,
    a: &DMatrix<f64>,
    stiff: Vec<bool>,
) -> Option<Factored> {
    let n = x.len();
    let p = a.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0 / x[i];
    }
    let stiff_rows: Vec<usize> = (0..s.len()).filter(|&j| stiff[j]).collect();
    for (j, row) in cons.ineq.iter().enumerate() {
        if stiff[j] {
            continue;
        }
        let d = mu[j] / s[j];
        for (&ia, &va) in row.idx.iter().zip(&row.val) {
            for (&ib, &vb) in row.idx.iter().zip(&row.val) {
                k[(ia, ib)] += d * va * vb;
            }
        }
    }
    let k_chol = k.cholesky()?;
    let mut c = DMatrix::zeros(p + stiff_rows.len(), n);
    c.rows_mut(0, p).copy_from(a);
    for (r, &j) in stiff_rows.iter().enumerate() {
        for (&i, &v) in cons.ineq[j].idx.iter().zip(&cons.ineq[j].val) {
            c[(p + r, i)] += v;
        }
    }
    let k_inv_ct = k_chol.solve(&c.transpose());
    let schur_chol = if c.nrows() > 0 {
        let mut schur = &c * &k_inv_ct;
        for (r, &j) in stiff_rows.iter().enumerate() {
            schur[(p + r, p + r)] += s[j] / mu[j];
        }
        Some(schur.cholesky()?)
    } else {
        None
    };
    Some(Factored {
        k_chol,
        c,
        k_inv_ct,
        schur_chol,
        stiff,
        stiff_rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn newton_step(
    f: &Factored,
    cons: &LinearConstraints,
    s: &[f64],
    mu: &[f64],
    r_d: &[f64],
    r_p: &[f64],
    r_g: &[f64],
    r_c: &[f64],
) -> Newton {
    let n = r_d.len();
    let p = r_p.len();
    // rho = -r_d - G_nᵀ S⁻¹ (M r_g - r_c) over the moderate rows
    let mut rho: Vec<f64> = r_d.iter().map(|v| -v).collect();
    for (j, row) in cons.ineq.iter().enumerate() {
        if f.stiff[j] {
            continue;
        }
        let w = (mu[j] * r_g[j] - r_c[j]) / s[j];
        for (&i, &g) in row.idx.iter().zip(&row.val) {
            rho[i] -= g * w;
        }
    }
    let rho = DVector::from_vec(rho);
    let k_inv_rho = f.k_chol.solve(&rho);
    let (dx, y) = match &f.schur_chol {
        Some(schur) => {
            // right-hand side [r_p; r_g - r_c/μ] on the binding rows
            let mut rhs = &f.c * &k_inv_rho;
            for i in 0..p {
                rhs[i] += r_p[i];
            }
            for (r, &j) in f.stiff_rows.iter().enumerate() {
                rhs[p + r] += r_g[j] - r_c[j] / mu[j];
            }
            let y = schur.solve(&rhs);
            (&k_inv_rho - &f.k_inv_ct * &y, y)
        }
        None => (k_inv_rho, DVector::zeros(0)),
    };
    let dx: Vec<f64> = dx.iter().copied().collect();
    let mut ds = vec![0.0; s.len()];
    let mut dmu = vec![0.0; s.len()];
    for (j, row) in cons.ineq.iter().enumerate() {
        if !f.stiff[j] {
            ds[j] = -r_g[j] - row.dot(&dx);
            dmu[j] = (-r_c[j] - mu[j] * ds[j]) / s[j];
        }
    }
    for (r, &j) in f.stiff_rows.iter().enumerate() {
        dmu[j] = y[p + r];
        ds[j] = (-r_c[j] - s[j] * dmu[j]) / mu[j];
    }
    debug_assert_eq!(dx.len(), n);
    Newton {
        dx,
        dnu: y.rows(0, p).iter().copied().collect(),
        dmu,
        ds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::polytope::SparseRow;

    fn simplex(n: usize) -> LinearConstraints {
        let mut c = LinearConstraints {
            n,
            ..Default::default()
        };
        c.push_eq(
            SparseRow {
                idx: (0..n).collect(),
                val: vec![1.0; n],
            },
            1.0,
        );
        c
    }

    #[test]
    fn exponentiated_gradient_closed_form() {
        let w = [0.3, -0.2, 1.1];
        let p = [0.2, 0.5, 0.3];
        let sol = solve(&w, &p, &simplex(3), &IpmSettings::default()).unwrap();
        let z: Vec<f64> = p.iter().zip(&w).map(|(p, w)| p * (-w).exp()).collect();
        let total: f64 = z.iter().sum();
        for (x, z) in sol.x.iter().zip(&z) {
            assert!((x - z / total).abs() < 1e-12);
        }
        assert!((sol.objective - sol.dual_value).abs() < 1e-10);
    }

    #[test]
    fn inequality_constrained_simplex_matches_grid() {
        let w = [-1.0, 0.5, 0.0];
        let p = [1.0 / 3.0; 3];
        let mut cons = simplex(3);
        cons.push_ineq(
            SparseRow {
                idx: vec![0, 1, 2],
                val: vec![0.4, -0.6, 0.0],
            },
            0.0,
        );
        let sol = solve(&w, &p, &cons, &IpmSettings::default()).unwrap();
        let mut best = f64::INFINITY;
        let steps = 1000;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let x = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
                if 0.4 * x[0] - 0.6 * x[1] <= 1e-12 {
                    best = best.min(kl_objective(&w, &p, &x));
                }
            }
        }
        assert!(sol.objective <= best + 1e-12);
        assert!(best - sol.objective < 1e-4, "{best} {sol:?}");
        assert!(0.4 * sol.x[0] - 0.6 * sol.x[1] <= 1e-10);
        assert!(sol.objective - sol.dual_value < 1e-9);
    }
}
