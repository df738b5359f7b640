//! Convex and linear solvers over occupancy polytopes.
//!
//! - [`polytope`] assembles the linear description of `Δ(𝒫)`;
//! - [`ipm`] is a primal-dual interior-point method for linearly constrained
//!   KL-prox problems;
//! - [`lp`] is a dense two-phase simplex for the small linear programs of the
//!   baselines and oracles;
//! - [`omd`] wires them into the mirror-descent step of the learner.

pub mod ipm;
pub mod lp;
pub mod omd;
pub mod polytope;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use omd::{bregman, lagrangian_dual, solve_omd_step, OmdProblem, OmdSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("constraint set is empty (smallest achievable max residual {min_residual:e})")]
    Infeasible { min_residual: f64 },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error(
        "no convergence after {iterations} iterations \
         (primal residual {primal_residual:e}, dual residual {dual_residual:e}, gap {gap:e})"
    )]
    NonConvergence {
        iterations: usize,
        best: Vec<f64>,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },
    #[error("Bregman divergence undefined: anchor is zero where the argument is positive (entry {0})")]
    Domain(usize),
}

/// Numerical settings of one mirror-descent solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Objective accuracy target.
    pub tol_obj: f64,
    /// Feasibility tolerance on the constraint rows.
    pub tol_feas: f64,
    /// Iteration cap of the interior-point loop.
    pub max_iter: usize,
    /// Emit one JSON diagnostic line per solve on stderr.
    pub debug: bool,
}

impl SolverSettings {
    pub fn for_layers(layers: usize) -> Self {
        Self {
            tol_obj: 1e-6 * layers as f64,
            tol_feas: 1e-8,
            max_iter: 300,
            debug: false,
        }
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self::for_layers(1)
    }
}
