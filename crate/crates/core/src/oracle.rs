//! Quantities computed with full knowledge of the instance: the safe and
//! unconstrained optima, the safety margin `ρ`, and the online metrics.

use serde::{Deserialize, Serialize};

use crate::cmdp::{CmdpInstance, OccupancyMeasure};
use crate::error::{Error, Result};
use crate::solver::lp::{self, LinearProgram};
use crate::solver::polytope::{fixed_transition_polytope, lift_to_triples, pair_functional_row};
use crate::solver::SolverError;

/// `OPT_Ḡ = max r̄ᵀq` over occupancies of the true model with `Ḡᵀq <= 0`.
///
/// `reward` is the (time-averaged) pair-indexed reward vector, `g_bar[i]`
/// the (time-averaged) cost vector of constraint `i`.
pub fn safe_optimum(
    instance: &CmdpInstance,
    g_bar: &[Vec<f64>],
    reward: &[f64],
) -> Result<(f64, OccupancyMeasure)> {
    let layout = &instance.layout;
    let mut cons = fixed_transition_polytope(layout, &instance.transitions);
    for g in g_bar {
        cons.push_ineq(pair_functional_row(layout, g), 0.0);
    }
    let program = LinearProgram {
        objective: lift_to_triples(layout, reward),
        constraints: cons,
    };
    match lp::solve(&program) {
        Ok(sol) => Ok((sol.value, OccupancyMeasure(sol.x))),
        Err(SolverError::Infeasible { .. }) => {
            Err(Error::Infeasible("no occupancy satisfies the mean constraints".into()))
        }
        Err(e) => Err(e.into()),
    }
}

/// `OPT = max r̄ᵀq` over all occupancies of the true model, by backward induction.
pub fn unconstrained_optimum(instance: &CmdpInstance, reward: &[f64]) -> f64 {
    let layout = &instance.layout;
    let mut v = vec![0.0; layout.n_states()];
    for k in (0..layout.n_layers()).rev() {
        for &x in layout.layer(k) {
            let succ = layout.successors(x);
            v[x] = (0..layout.n_actions())
                .map(|a| {
                    let p = instance.transitions.row(layout, x, a);
                    reward[layout.pair(x, a)]
                        + p.iter().zip(succ).map(|(p, &s)| p * v[s]).sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    v[layout.initial_state()]
}

/// Per-pair margin `min_i -g_i(x,a)` of one cost profile.
pub fn pair_margins(costs: &[Vec<f64>], n_pairs: usize) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; n_pairs];
    for g in costs {
        for (m, g) in out.iter_mut().zip(g) {
            *m = m.min(-g);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoResult {
    pub rho: f64,
    pub alpha: f64,
    /// Occupancy supported on the surviving pairs (uniform over usable actions).
    pub q_diamond: Option<Vec<f64>>,
}

/// Pairs and states usable when only pairs with `margin >= theta` are allowed.
///
/// A pair is usable if its margin passes and every successor it reaches with
/// positive probability is usable; a state is usable if it has a usable
/// action (the terminal state always is).
fn usable_pairs(instance: &CmdpInstance, margins: &[f64], theta: f64) -> (Vec<bool>, Vec<bool>) {
    let layout = &instance.layout;
    let mut state_ok = vec![false; layout.n_states()];
    let mut pair_ok = vec![false; layout.n_pairs()];
    state_ok[layout.terminal_state()] = true;
    for k in (0..layout.n_layers()).rev() {
        for &x in layout.layer(k) {
            let succ = layout.successors(x);
            for a in 0..layout.n_actions() {
                let pair = layout.pair(x, a);
                let p = instance.transitions.row(layout, x, a);
                pair_ok[pair] = margins[pair] >= theta
                    && p.iter().zip(succ).all(|(&p, &s)| p == 0.0 || state_ok[s]);
                state_ok[x] |= pair_ok[pair];
            }
        }
    }
    (pair_ok, state_ok)
}

/// `ρ`: the largest margin level at which a valid occupancy avoids every
/// pair below that level, clamped to `[0, 1]`; `α = ρ / (1 + ρ)`.
///
/// `margins` is pair-indexed (see [`pair_margins`]).
pub fn compute_rho(instance: &CmdpInstance, margins: &[f64]) -> RhoResult {
    let layout = &instance.layout;
    let mut levels: Vec<f64> = layout
        .active_pairs()
        .map(|(x, a)| margins[layout.pair(x, a)])
        .collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    for theta in levels {
        if theta < 0.0 {
            break;
        }
        let (pair_ok, state_ok) = usable_pairs(instance, margins, theta);
        if state_ok[layout.initial_state()] {
            let rho = theta.min(1.0);
            let pi = diamond_policy(instance, &pair_ok);
            let q = crate::cmdp::compute_occupancy(layout, &instance.transitions, &pi)
                .expect("shapes come from the instance");
            return RhoResult {
                rho,
                alpha: rho / (1.0 + rho),
                q_diamond: Some(q.0),
            };
        }
    }
    RhoResult {
        rho: 0.0,
        alpha: 0.0,
        q_diamond: None,
    }
}

fn diamond_policy(instance: &CmdpInstance, pair_ok: &[bool]) -> crate::cmdp::Policy {
    let layout = &instance.layout;
    let n = layout.n_actions();
    let mut probs = vec![1.0 / n as f64; layout.n_pairs()];
    for x in (0..layout.n_states()).filter(|&x| !layout.is_terminal(x)) {
        let ok: Vec<usize> = (0..n).filter(|&a| pair_ok[layout.pair(x, a)]).collect();
        if !ok.is_empty() {
            for a in 0..n {
                probs[layout.pair(x, a)] = if ok.contains(&a) { 1.0 / ok.len() as f64 } else { 0.0 };
            }
        }
    }
    crate::cmdp::Policy::new(layout, probs).expect("rows are distributions")
}

/// Oracle values a run is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    /// `OPT_Ḡ`; `None` when the averaged constraints admit no occupancy.
    pub opt_safe: Option<f64>,
    pub opt: f64,
    pub rho: f64,
    pub alpha: f64,
}

/// Per-episode expected values of the played policy.
///
/// Cumulative series are derived on demand so that they are always exactly
/// reproducible from the stored per-episode values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricStream {
    /// `r_tᵀq_t`
    pub reward: Vec<f64>,
    /// `g_{t,i}ᵀq_t`, indexed `[i][t]`.
    pub cost: Vec<Vec<f64>>,
    /// `ḡ_iᵀq_t` for stochastic constraints, indexed `[i][t]`.
    pub mean_cost: Option<Vec<Vec<f64>>>,
}

/// Cumulative metric series, one entry per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeMetrics {
    /// `R_t = t OPT_Ḡ - Σ r_τᵀq_τ`.
    pub regret: Option<Vec<f64>>,
    /// `t α OPT - Σ r_τᵀq_τ`.
    pub alpha_regret: Vec<f64>,
    /// `V_t = max_i Σ g_{τ,i}ᵀq_τ`.
    pub violation: Vec<f64>,
    /// `𝒱_t = max_i Σ [ḡ_iᵀq_τ]⁺`.
    pub positive_violation: Option<Vec<f64>>,
}

impl CumulativeMetrics {
    /// `(name, series)` for every defined metric, in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, &[f64])> {
        let mut out = Vec::new();
        if let Some(r) = &self.regret {
            out.push(("regret", r.as_slice()));
        }
        out.push(("alpha_regret", self.alpha_regret.as_slice()));
        out.push(("violation", self.violation.as_slice()));
        if let Some(v) = &self.positive_violation {
            out.push(("positive_violation", v.as_slice()));
        }
        out
    }
}

impl MetricStream {
    pub fn new(m: usize, track_means: bool) -> Self {
        Self {
            reward: Vec::new(),
            cost: vec![Vec::new(); m],
            mean_cost: track_means.then(|| vec![Vec::new(); m]),
        }
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }

    pub fn cumulative(&self, oracle: &OracleValues) -> CumulativeMetrics {
        let n = self.len();
        let mut reward_sum = 0.0;
        let mut regret = oracle.opt_safe.map(|_| Vec::with_capacity(n));
        let mut alpha_regret = Vec::with_capacity(n);
        let mut violation = Vec::with_capacity(n);
        let mut positive = self.mean_cost.as_ref().map(|_| Vec::with_capacity(n));
        let mut cost_sums = vec![0.0; self.cost.len()];
        let mut positive_sums = vec![0.0; self.cost.len()];
        for t in 0..n {
            reward_sum += self.reward[t];
            let episodes = (t + 1) as f64;
            if let (Some(series), Some(opt)) = (regret.as_mut(), oracle.opt_safe) {
                series.push(episodes * opt - reward_sum);
            }
            alpha_regret.push(episodes * oracle.alpha * oracle.opt - reward_sum);
            for (s, c) in cost_sums.iter_mut().zip(&self.cost) {
                *s += c[t];
            }
            violation.push(cost_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            if let (Some(series), Some(means)) = (positive.as_mut(), &self.mean_cost) {
                for (s, g) in positive_sums.iter_mut().zip(means) {
                    *s += g[t].max(0.0);
                }
                series.push(positive_sums.iter().copied().fold(0.0, f64::max));
            }
        }
        CumulativeMetrics {
            regret,
            alpha_regret,
            violation,
            positive_violation: positive,
        }
    }
}

/// Appends one episode: `q_pairs` are the pair marginals of the true occupancy
/// of the played policy, `reward` and `costs` the vectors in force, `g_bar`
/// the true mean costs when the constraints are stochastic.
pub fn update_metrics(
    stream: &mut MetricStream,
    q_pairs: &[f64],
    reward: &[f64],
    costs: &[Vec<f64>],
    g_bar: Option<&[Vec<f64>]>,
) {
    let dot = |v: &[f64]| -> f64 { v.iter().zip(q_pairs).map(|(v, q)| v * q).sum() };
    stream.reward.push(dot(reward));
    for (series, g) in stream.cost.iter_mut().zip(costs) {
        series.push(dot(g));
    }
    if let (Some(series), Some(means)) = (stream.mean_cost.as_mut(), g_bar) {
        for (s, g) in series.iter_mut().zip(means) {
            s.push(dot(g));
        }
    }
}
