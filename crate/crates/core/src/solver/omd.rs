//! Mirror-descent step `argmin_q ℓ̂ᵀq + B(q‖q̂)/η` over the optimistic safe set.

use serde_json::json;

use super::ipm::{self, IpmSettings};
use super::lp::{self, LinearProgram};
use super::polytope::{confidence_polytope, lift_to_triples, pair_functional_row, LinearConstraints};
use super::{SolverError, SolverSettings};
use crate::cmdp::{Layout, OccupancyMeasure};
use crate::feasible::{robust_values, FeasibleSetSpec};

/// Anchor entries below this are lifted before the step.
const ANCHOR_FLOOR: f64 = 1e-12;

/// Unnormalized KL divergence `Σ q ln(q/p) - Σ (q - p)` with `0 ln 0 = 0`.
pub fn bregman(q: &[f64], p: &[f64]) -> Result<f64, SolverError> {
    let mut total = 0.0;
    for (i, (&q, &p)) in q.iter().zip(p).enumerate() {
        if q > 0.0 {
            if p <= 0.0 {
                return Err(SolverError::Domain(i));
            }
            total += q * (q / p).ln();
        }
        total -= q - p;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct OmdProblem<'a> {
    pub layout: &'a Layout,
    /// Pair-indexed loss estimate, copied along each row of triples.
    pub loss: &'a [f64],
    pub anchor: &'a OccupancyMeasure,
    pub feasible: &'a FeasibleSetSpec,
    pub eta: f64,
    pub settings: SolverSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmdSolution {
    pub q: OccupancyMeasure,
    /// Multiplier `λ_i` of each constraint row.
    pub multipliers: Vec<f64>,
    /// `ℓ̂ᵀq + B(q‖q̂)/η` at the returned point.
    pub objective: f64,
    /// Lagrange dual value at the returned multipliers (lower bound on the optimum).
    pub dual_value: f64,
    pub iterations: usize,
    /// `max_i c_iᵀq`, or `-∞` without constraints.
    pub max_residual: f64,
}

impl OmdSolution {
    pub fn duality_gap(&self) -> f64 {
        self.objective - self.dual_value
    }
}

fn smoothed_anchor(anchor: &OccupancyMeasure) -> Vec<f64> {
    if anchor.0.iter().any(|&v| v < ANCHOR_FLOOR) {
        anchor.0.iter().map(|&v| v.max(0.0) + ANCHOR_FLOOR).collect()
    } else {
        anchor.0.clone()
    }
}

fn ipm_settings(settings: &SolverSettings) -> IpmSettings {
    IpmSettings {
        max_iter: settings.max_iter,
        ..IpmSettings::default()
    }
}

fn assemble(problem: &OmdProblem<'_>) -> (Vec<f64>, LinearConstraints) {
    let layout = problem.layout;
    let linear: Vec<f64> = lift_to_triples(layout, problem.loss)
        .into_iter()
        .map(|v| problem.eta * v)
        .collect();
    let mut cons = confidence_polytope(layout, &problem.feasible.model);
    for c in &problem.feasible.shifted {
        cons.push_ineq(pair_functional_row(layout, c), 0.0);
    }
    (linear, cons)
}

/// Smallest value of `c_iᵀq` over the transition polytope, per constraint.
pub fn min_residuals(layout: &Layout, feasible: &FeasibleSetSpec) -> Vec<f64> {
    feasible
        .shifted
        .iter()
        .map(|c| {
            let (_, v) = robust_values(layout, &feasible.model, c, None, false);
            v[layout.initial_state()]
        })
        .collect()
}

/// Solves one mirror-descent step.
///
/// Reports `Infeasible` when no occupancy in the confidence set satisfies
/// every shifted constraint; the caller chooses the fallback.
pub fn solve_omd_step(problem: &OmdProblem<'_>) -> Result<OmdSolution, SolverError> {
    let layout = problem.layout;
    let settings = &problem.settings;
    let worst = min_residuals(layout, problem.feasible)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > settings.tol_feas {
        return Err(SolverError::Infeasible { min_residual: worst });
    }

    let anchor = smoothed_anchor(problem.anchor);
    let (linear, cons) = assemble(problem);
    let n_box = cons.ineq.len() - problem.feasible.shifted.len();
    let outcome = ipm::solve(&linear, &anchor, &cons, &ipm_settings(settings));
    let result = match outcome {
        Ok(sol) => {
            let q = OccupancyMeasure(sol.x.iter().map(|v| v.max(0.0)).collect());
            let pair_mass = q.pair_marginals(layout);
            let max_residual = problem.feasible.max_residual(&pair_mass);
            Ok(OmdSolution {
                multipliers: sol.ineq_mult[n_box..].iter().map(|m| m / problem.eta).collect(),
                objective: sol.objective / problem.eta,
                dual_value: sol.dual_value / problem.eta,
                iterations: sol.iterations,
                max_residual,
                q,
            })
        }
        Err(failure) => {
            let last = failure.last;
            // distinguish an empty set from a numerical failure
            let probe = LinearProgram {
                objective: vec![0.0; cons.n],
                constraints: cons.clone(),
            };
            match lp::solve(&probe) {
                Err(SolverError::Infeasible { min_residual }) => {
                    Err(SolverError::Infeasible { min_residual })
                }
                _ => Err(SolverError::NonConvergence {
                    iterations: last.iterations,
                    best: last.x,
                    primal_residual: last.primal_residual,
                    dual_residual: last.dual_residual,
                    gap: last.gap,
                }),
            }
        }
    };
    if settings.debug {
        let record = match &result {
            Ok(s) => json!({
                "status": "ok",
                "iterations": s.iterations,
                "objective": s.objective,
                "dual_value": s.dual_value,
                "gap": s.duality_gap(),
                "max_residual": s.max_residual,
                "multipliers": s.multipliers,
            }),
            Err(e) => json!({ "status": "error", "error": e.to_string() }),
        };
        eprintln!("{record}");
    }
    result
}

/// Lagrange dual function at multipliers `λ >= 0`:
/// `min_{q ∈ Δ(𝒫)} (ℓ̂ + Σ λ_i c_i)ᵀq + B(q‖q̂)/η`.
///
/// Any value is a lower bound on the constrained optimum.
pub fn lagrangian_dual(problem: &OmdProblem<'_>, lambda: &[f64]) -> Result<f64, SolverError> {
    let mut loss = problem.loss.to_vec();
    for (c, &l) in problem.feasible.shifted.iter().zip(lambda) {
        for (v, c) in loss.iter_mut().zip(c) {
            *v += l * c;
        }
    }
    let relaxed = problem.feasible.without_constraints();
    let inner = OmdProblem {
        loss: &loss,
        feasible: &relaxed,
        ..problem.clone()
    };
    let anchor = smoothed_anchor(problem.anchor);
    let (linear, cons) = assemble(&inner);
    let sol = ipm::solve(&linear, &anchor, &cons, &ipm_settings(&problem.settings)).map_err(|f| {
        SolverError::NonConvergence {
            iterations: f.last.iterations,
            best: f.last.x,
            primal_residual: f.last.primal_residual,
            dual_residual: f.last.dual_residual,
            gap: f.last.gap,
        }
    })?;
    // certified from below by the inner dual, so weak duality survives round-off
    Ok(sol.dual_value / problem.eta)
}
