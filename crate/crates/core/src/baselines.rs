//! Comparison learners: OptCMDP, OptPrimalDual-CMDP and Greedy.
//!
//! Only their overall shape is fixed by the usual descriptions (optimistic
//! LP, optimistic primal-dual, plug-in LP). Bonus shapes, step sizes, the dual
//! cap and the warm-up rule below are choices of this crate.

use serde::{Deserialize, Serialize};

use crate::cmdp::{
    compute_occupancy, policy_from_marginals, EpisodeTrace, Layout, Policy, ProblemSizes,
    Transitions,
};
use crate::error::{Error, Result};
use crate::estimation::CounterState;
use crate::feasible::{bonus, confidence_width, robust_values, ConfidenceModel};
use crate::solver::lp::{self, LinearProgram};
use crate::solver::polytope::{confidence_polytope, lift_to_triples, pair_functional_row};
use crate::solver::SolverError;
use crate::wcops::{Learner, LearnerEvent};

/// Visit counters plus empirical reward and cost means.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    pub counters: CounterState,
    reward_sum: Vec<f64>,
    cost_sum: Vec<Vec<f64>>,
}

impl EmpiricalStats {
    pub fn new(layout: &Layout, m: usize) -> Self {
        Self {
            counters: CounterState::new(layout),
            reward_sum: vec![0.0; layout.n_pairs()],
            cost_sum: vec![vec![0.0; layout.n_pairs()]; m],
        }
    }

    pub fn update(&mut self, layout: &Layout, trace: &EpisodeTrace) {
        self.counters.update(layout, trace);
        for s in &trace.steps {
            let pair = layout.pair(s.state, s.action);
            self.reward_sum[pair] += s.reward;
            for (sum, g) in self.cost_sum.iter_mut().zip(&s.costs) {
                sum[pair] += g;
            }
        }
    }

    fn mean(sum: &[f64], visits: &[u64]) -> Vec<f64> {
        sum.iter().zip(visits).map(|(s, &n)| s / n.max(1) as f64).collect()
    }

    /// Empirical mean reward, 0 on unvisited pairs.
    pub fn reward_mean(&self) -> Vec<f64> {
        Self::mean(&self.reward_sum, &self.counters.visits)
    }

    /// Empirical mean cost per constraint, 0 on unvisited pairs.
    pub fn cost_mean(&self) -> Vec<Vec<f64>> {
        self.cost_sum
            .iter()
            .map(|s| Self::mean(s, &self.counters.visits))
            .collect()
    }

    /// Empirical transitions, triple-indexed (all-zero rows where unvisited).
    pub fn p_bar(&self, layout: &Layout) -> Vec<f64> {
        let mut p = vec![0.0; layout.n_triples()];
        for (x, a) in layout.active_pairs() {
            let n = self.counters.visits[layout.pair(x, a)].max(1) as f64;
            for t in layout.row(x, a) {
                p[t] = self.counters.transitions[t] as f64 / n;
            }
        }
        p
    }
}

/// Optimistic LP `max (r̄ + s·b)_{[0,1]}ᵀq` over `Δ(𝒫)` with `(ḡ_i - s·b)ᵀq <= 0`.
///
/// `scale = 0` gives the plug-in program (widths and bonuses zero, unvisited
/// rows unconstrained). Returns pair marginals and whether the constraints
/// could be kept.
pub fn optimistic_lp(
    layout: &Layout,
    stats: &EmpiricalStats,
    sizes: &ProblemSizes,
    delta: f64,
    scale: f64,
) -> Result<(Vec<f64>, bool)> {
    let visits = &stats.counters.visits;
    let mut eps = vec![0.0; layout.n_pairs()];
    let mut b = vec![0.0; layout.n_pairs()];
    if scale > 0.0 {
        for (x, a) in layout.active_pairs() {
            let pair = layout.pair(x, a);
            eps[pair] = scale * confidence_width(visits[pair], layout.successors(x).len(), sizes, delta)?;
            b[pair] = scale * bonus(visits[pair], sizes, delta)?;
        }
    }
    let model = ConfidenceModel::from_parts(layout, stats.p_bar(layout), eps, visits.clone());
    let reward: Vec<f64> = stats
        .reward_mean()
        .iter()
        .zip(&b)
        .map(|(r, b)| (r + b).clamp(0.0, 1.0))
        .collect();
    let base = confidence_polytope(layout, &model);
    let mut constrained = base.clone();
    for g in stats.cost_mean() {
        let c: Vec<f64> = g.iter().zip(&b).map(|(g, b)| g - b).collect();
        constrained.push_ineq(pair_functional_row(layout, &c), 0.0);
    }
    let objective = lift_to_triples(layout, &reward);
    let solve = |cons| {
        lp::solve(&LinearProgram {
            objective: objective.clone(),
            constraints: cons,
        })
    };
    match solve(constrained) {
        Ok(sol) => Ok((layout.pair_marginals(&sol.x), true)),
        Err(SolverError::Infeasible { .. }) => {
            let sol = solve(base)?;
            Ok((layout.pair_marginals(&sol.x), false))
        }
        Err(e) => Err(e.into()),
    }
}

/// Shared state of the two LP-based baselines.
#[derive(Debug, Clone)]
struct LpLearner {
    layout: Layout,
    sizes: ProblemSizes,
    delta: f64,
    scale: f64,
    stats: EmpiricalStats,
    policy: Policy,
    episode: usize,
    events: Vec<LearnerEvent>,
}

impl LpLearner {
    fn new(layout: &Layout, m: usize, horizon: usize, delta: f64, scale: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self {
            layout: layout.clone(),
            sizes: ProblemSizes::of(layout, m, horizon),
            delta,
            scale,
            stats: EmpiricalStats::new(layout, m),
            policy: Policy::uniform(layout),
            episode: 0,
            events: Vec::new(),
        })
    }

    fn observe(&mut self, trace: &EpisodeTrace) -> Result<()> {
        trace.validate(&self.layout, self.sizes.constraints)?;
        self.episode += 1;
        self.stats.update(&self.layout, trace);
        self.replan()
    }

    fn replan(&mut self) -> Result<()> {
        let (marginals, constrained) =
            optimistic_lp(&self.layout, &self.stats, &self.sizes, self.delta, self.scale)?;
        if !constrained {
            log::info!("episode {}: LP constraints infeasible, dropped", self.episode);
            self.events.push(LearnerEvent::InfeasibleFallback {
                episode: self.episode,
                min_residual: None,
            });
        }
        self.policy = policy_from_marginals(&self.layout, &marginals);
        Ok(())
    }
}

/// Optimistic LP learner.
#[derive(Debug, Clone)]
pub struct OptCmdp(LpLearner);

impl OptCmdp {
    pub fn new(layout: &Layout, m: usize, horizon: usize, delta: f64) -> Result<Self> {
        LpLearner::new(layout, m, horizon, delta, 1.0).map(Self)
    }

    /// Same learner with widths and bonuses multiplied by `scale`.
    pub fn with_scale(layout: &Layout, m: usize, horizon: usize, delta: f64, scale: f64) -> Result<Self> {
        LpLearner::new(layout, m, horizon, delta, scale).map(Self)
    }

    pub fn stats(&self) -> &EmpiricalStats {
        &self.0.stats
    }
}

impl Learner for OptCmdp {
    fn name(&self) -> &str {
        "OptCMDP"
    }

    fn act(&self) -> Policy {
        self.0.policy.clone()
    }

    fn observe(&mut self, trace: &EpisodeTrace) -> Result<()> {
        self.0.observe(trace)
    }

    fn events(&self) -> &[LearnerEvent] {
        &self.0.events
    }
}

/// Plug-in learner: the LP on empirical means.
///
/// Plays uniformly until every non-terminal pair has been visited once (at
/// most `10 |X| |A|` episodes).
#[derive(Debug, Clone)]
pub struct Greedy {
    inner: LpLearner,
    warmup_cap: usize,
    warm: bool,
}

impl Greedy {
    pub fn new(layout: &Layout, m: usize, horizon: usize, delta: f64) -> Result<Self> {
        Ok(Self {
            inner: LpLearner::new(layout, m, horizon, delta, 0.0)?,
            warmup_cap: 10 * layout.n_states() * layout.n_actions(),
            warm: false,
        })
    }

    pub fn stats(&self) -> &EmpiricalStats {
        &self.inner.stats
    }

    pub fn is_warm(&self) -> bool {
        self.warm
    }
}

impl Learner for Greedy {
    fn name(&self) -> &str {
        "Greedy"
    }

    fn act(&self) -> Policy {
        self.inner.policy.clone()
    }

    fn observe(&mut self, trace: &EpisodeTrace) -> Result<()> {
        let inner = &mut self.inner;
        trace.validate(&inner.layout, inner.sizes.constraints)?;
        inner.episode += 1;
        inner.stats.update(&inner.layout, trace);
        if !self.warm {
            let layout = &inner.layout;
            let all_seen = layout
                .active_pairs()
                .all(|(x, a)| inner.stats.counters.visits[layout.pair(x, a)] > 0);
            self.warm = all_seen || inner.episode >= self.warmup_cap;
        }
        if self.warm {
            inner.replan()
        } else {
            Ok(())
        }
    }

    fn events(&self) -> &[LearnerEvent] {
        &self.inner.events
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualParams {
    pub delta: f64,
    pub horizon: usize,
    /// Safety-margin estimate used for the dual cap `L / max(ρ̂, 0.1)`.
    pub rho_hat: f64,
}

/// Optimistic primal-dual learner.
///
/// Primal: per-state exponentiated-gradient step on optimistic `Q`-values of
/// the Lagrangian reward `r̄ + b - Σ λ_i (ḡ_i - b)`, step `sqrt(2 ln|A| / (L² T))`.
/// Dual: `λ_i <- clamp(λ_i + ḡ_iᵀq / sqrt(T), 0, λ_max)` where `q` is the
/// occupancy of the played policy under the empirical transitions
/// (uniform on unvisited rows).
#[derive(Debug, Clone)]
pub struct OptPrimalDual {
    layout: Layout,
    sizes: ProblemSizes,
    delta: f64,
    stats: EmpiricalStats,
    policy: Policy,
    lambda: Vec<f64>,
    lambda_max: f64,
    eta_policy: f64,
    eta_dual: f64,
    episode: usize,
    events: Vec<LearnerEvent>,
}

impl OptPrimalDual {
    pub fn new(layout: &Layout, m: usize, params: &PrimalDualParams) -> Result<Self> {
        if !(params.delta > 0.0 && params.delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {}", params.delta)));
        }
        let l = layout.n_layers() as f64;
        let t = params.horizon.max(1) as f64;
        let actions = layout.n_actions().max(2) as f64;
        Ok(Self {
            layout: layout.clone(),
            sizes: ProblemSizes::of(layout, m, params.horizon),
            delta: params.delta,
            stats: EmpiricalStats::new(layout, m),
            policy: Policy::uniform(layout),
            lambda: vec![0.0; m],
            lambda_max: l / params.rho_hat.max(0.1),
            eta_policy: (2.0 * actions.ln() / (l * l * t)).sqrt(),
            eta_dual: 1.0 / t.sqrt(),
            episode: 0,
            events: Vec::new(),
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn plug_in_transitions(&self) -> Transitions {
        let layout = &self.layout;
        let mut p = self.stats.p_bar(layout);
        for (x, a) in layout.active_pairs() {
            if self.stats.counters.visits[layout.pair(x, a)] == 0 {
                let row = layout.row(x, a);
                let w = 1.0 / row.len() as f64;
                p[row].iter_mut().for_each(|v| *v = w);
            }
        }
        Transitions(p)
    }
}

impl Learner for OptPrimalDual {
    fn name(&self) -> &str {
        "OptPrimalDual"
    }

    fn act(&self) -> Policy {
        self.policy.clone()
    }

    fn observe(&mut self, trace: &EpisodeTrace) -> Result<()> {
        let layout = self.layout.clone();
        trace.validate(&layout, self.sizes.constraints)?;
        self.episode += 1;
        self.stats.update(&layout, trace);

        let visits = &self.stats.counters.visits;
        let mut b = vec![0.0; layout.n_pairs()];
        let mut eps = vec![0.0; layout.n_pairs()];
        for (x, a) in layout.active_pairs() {
            let pair = layout.pair(x, a);
            b[pair] = bonus(visits[pair], &self.sizes, self.delta)?;
            eps[pair] = confidence_width(visits[pair], layout.successors(x).len(), &self.sizes, self.delta)?;
        }
        let model = ConfidenceModel::from_parts(&layout, self.stats.p_bar(&layout), eps, visits.clone());
        let cost_mean = self.stats.cost_mean();

        // dual step on the policy that was just played
        let q_played = compute_occupancy(&layout, &self.plug_in_transitions(), &self.policy)?
            .pair_marginals(&layout);
        for (lambda, g) in self.lambda.iter_mut().zip(&cost_mean) {
            let grad: f64 = g.iter().zip(&q_played).map(|(g, q)| g * q).sum();
            *lambda = (*lambda + self.eta_dual * grad).clamp(0.0, self.lambda_max);
        }

        // primal step
        let mut lagrangian: Vec<f64> = self
            .stats
            .reward_mean()
            .iter()
            .zip(&b)
            .map(|(r, b)| r + b)
            .collect();
        for (lambda, g) in self.lambda.iter().zip(&cost_mean) {
            for ((v, g), b) in lagrangian.iter_mut().zip(g).zip(&b) {
                *v -= lambda * (g - b);
            }
        }
        let (q_values, _) = robust_values(&layout, &model, &lagrangian, Some(&self.policy), true);
        let n_actions = layout.n_actions();
        let mut probs = self.policy.as_slice().to_vec();
        for k in 0..layout.n_layers() {
            for &x in layout.layer(k) {
                let row = &mut probs[x * n_actions..(x + 1) * n_actions];
                let qs = &q_values[x * n_actions..(x + 1) * n_actions];
                let top = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (p, q) in row.iter_mut().zip(qs) {
                    *p *= (self.eta_policy * (q - top)).exp();
                }
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= z);
            }
        }
        self.policy = Policy::new(&layout, probs)?;
        Ok(())
    }

    fn events(&self) -> &[LearnerEvent] {
        &self.events
    }
}
