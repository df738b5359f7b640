//! Per-episode decision space: transition confidence set, upper occupancy
//! bounds, optimistic constraint bonuses and the shifted constraint vectors.

use serde::{Deserialize, Serialize};

use crate::cmdp::{Layout, Policy, ProblemSizes, Transitions};
use crate::error::{Error, Result};
use crate::estimation::CounterState;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Confidence width `sqrt(2 |X_{k+1}| ln(T |X| |A| / δ) / max(1, N))`.
pub fn confidence_width(
    visits: u64,
    next_layer_size: usize,
    sizes: &ProblemSizes,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    let log_term =
        (sizes.horizon as f64 * sizes.states as f64 * sizes.actions as f64 / delta).ln();
    Ok((2.0 * next_layer_size as f64 * log_term / visits.max(1) as f64).sqrt())
}

/// Constraint bonus `sqrt(2 ln(2 m |X| |A| T / δ) / max(1, N))`.
pub fn bonus(visits: u64, sizes: &ProblemSizes, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let log_term = (2.0
        * sizes.constraints.max(1) as f64
        * sizes.states as f64
        * sizes.actions as f64
        * sizes.horizon as f64
        / delta)
        .ln();
    Ok((2.0 * log_term / visits.max(1) as f64).sqrt())
}

/// Pair-indexed bonus vector for the current counters.
pub fn bonus_vector(counters: &CounterState, sizes: &ProblemSizes, delta: f64) -> Result<Vec<f64>> {
    counters.visits.iter().map(|&n| bonus(n, sizes, delta)).collect()
}

/// Transition confidence set: every row within `ε(x,a)` of the empirical row.
///
/// Besides the raw description the model keeps, per triple, the tightest
/// interval `[lower, upper]` that the entry can take over rows that lie in the
/// box *and* sum to one. Rows never visited are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceModel {
    p_bar: Vec<f64>,
    eps: Vec<f64>,
    visits: Vec<u64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ConfidenceModel {
    pub fn new(
        layout: &Layout,
        counters: &CounterState,
        sizes: &ProblemSizes,
        delta: f64,
    ) -> Result<Self> {
        let mut p_bar = vec![0.0; layout.n_triples()];
        let mut eps = vec![0.0; layout.n_pairs()];
        for (x, a) in layout.active_pairs() {
            let pair = layout.pair(x, a);
            let n = counters.visits[pair];
            let denom = n.max(1) as f64;
            for t in layout.row(x, a) {
                p_bar[t] = counters.transitions[t] as f64 / denom;
            }
            eps[pair] = confidence_width(n, layout.successors(x).len(), sizes, delta)?;
        }
        Ok(Self::from_parts(layout, p_bar, eps, counters.visits.clone()))
    }

    /// The set of all transition functions.
    pub fn unconstrained(layout: &Layout) -> Self {
        Self::from_parts(
            layout,
            vec![0.0; layout.n_triples()],
            vec![f64::INFINITY; layout.n_pairs()],
            vec![0; layout.n_pairs()],
        )
    }

    /// Builds a model from explicit empirical rows and widths.
    pub fn from_parts(layout: &Layout, p_bar: Vec<f64>, eps: Vec<f64>, visits: Vec<u64>) -> Self {
        let mut lower = vec![0.0; layout.n_triples()];
        let mut upper = vec![1.0; layout.n_triples()];
        for (x, a) in layout.active_pairs() {
            let pair = layout.pair(x, a);
            if visits[pair] == 0 {
                continue;
            }
            let row = layout.row(x, a);
            let e = eps[pair];
            let lo: Vec<f64> = p_bar[row.clone()].iter().map(|p| (p - e).max(0.0)).collect();
            let hi: Vec<f64> = p_bar[row.clone()].iter().map(|p| (p + e).min(1.0)).collect();
            let sum_lo: f64 = lo.iter().sum();
            let sum_hi: f64 = hi.iter().sum();
            for (j, t) in row.enumerate() {
                upper[t] = hi[j].min(1.0 - (sum_lo - lo[j]));
                lower[t] = lo[j].max(1.0 - (sum_hi - hi[j]));
            }
        }
        Self {
            p_bar,
            eps,
            visits,
            lower,
            upper,
        }
    }

    /// Empirical transitions `P̄_t`, triple-indexed.
    pub fn p_bar(&self) -> &[f64] {
        &self.p_bar
    }

    /// Widths `ε_t(x, a)`, pair-indexed.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Smallest value of each entry over rows of the confidence set.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Largest value of each entry over rows of the confidence set (`p_max`).
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Whether `transitions` lies in the set (`|P - P̄| <= ε` on every visited row).
    pub fn contains(&self, layout: &Layout, transitions: &Transitions) -> bool {
        layout.active_pairs().all(|(x, a)| {
            let pair = layout.pair(x, a);
            self.visits[pair] == 0
                || layout
                    .row(x, a)
                    .all(|t| (transitions.0[t] - self.p_bar[t]).abs() <= self.eps[pair])
        })
    }
}

/// Largest (or smallest) value of `Σ p(x') v(x')` over rows with
/// `lower <= p <= upper` summing to one: fill the lower bounds, then pour the
/// remaining mass into the best entries first.
pub fn extreme_row(lower: &[f64], upper: &[f64], values: &[f64], maximize: bool) -> Vec<f64> {
    let mut p = lower.to_vec();
    let mut remaining = 1.0 - lower.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let ord = values[i].total_cmp(&values[j]);
        if maximize { ord.reverse() } else { ord }.then(i.cmp(&j))
    });
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).max(0.0).min(remaining);
        p[i] += add;
        remaining -= add;
    }
    p
}

/// Optimistic (`maximize`) or pessimistic dynamic program over the
/// confidence set for the pair-indexed per-step value `c`.
///
/// With `policy = None` the action is also optimized; otherwise the policy is
/// evaluated. Returns pair-indexed `Q` and state-indexed `V`.
pub fn robust_values(
    layout: &Layout,
    model: &ConfidenceModel,
    c: &[f64],
    policy: Option<&Policy>,
    maximize: bool,
) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; layout.n_states()];
    let mut q = vec![0.0; layout.n_pairs()];
    for k in (0..layout.n_layers()).rev() {
        for &x in layout.layer(k) {
            let succ_values: Vec<f64> = layout.successors(x).iter().map(|&s| v[s]).collect();
            for a in 0..layout.n_actions() {
                let row = layout.row(x, a);
                let p = extreme_row(
                    &model.lower[row.clone()],
                    &model.upper[row],
                    &succ_values,
                    maximize,
                );
                let next: f64 = p.iter().zip(&succ_values).map(|(p, v)| p * v).sum();
                q[layout.pair(x, a)] = c[layout.pair(x, a)] + next;
            }
            let qs = &q[layout.pair(x, 0)..layout.pair(x, 0) + layout.n_actions()];
            v[x] = match policy {
                Some(pi) => pi.row(x).iter().zip(qs).map(|(p, q)| p * q).sum(),
                None if maximize => qs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                None => qs.iter().copied().fold(f64::INFINITY, f64::min),
            };
        }
    }
    (q, v)
}

/// Upper occupancy bound `u_t(x, a)`, pair-indexed.
///
/// Layer-wise forward pass: `u(x') = min(1, Σ_{x,a} u(x) π(a|x) p_max(x'|x,a))`.
/// Dominates `q^{P,π}(x, a)` for every `P` in the confidence set.
pub fn upper_occupancy(layout: &Layout, model: &ConfidenceModel, pi: &Policy) -> Vec<f64> {
    let mut state_mass = vec![0.0; layout.n_states()];
    state_mass[layout.initial_state()] = 1.0;
    let mut u = vec![0.0; layout.n_pairs()];
    for k in 0..layout.n_layers() {
        let mut next = vec![0.0; layout.layer(k + 1).len()];
        for &x in layout.layer(k) {
            for a in 0..layout.n_actions() {
                let ua = state_mass[x] * pi.prob(x, a);
                u[layout.pair(x, a)] = ua;
                if ua == 0.0 {
                    continue;
                }
                for (j, t) in layout.row(x, a).enumerate() {
                    next[j] += ua * model.upper[t];
                }
            }
        }
        for (j, &x) in layout.layer(k + 1).iter().enumerate() {
            state_mass[x] = next[j].min(1.0);
        }
    }
    u
}

/// Diagnostic label only; both settings build the same set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SettingLabel {
    StochasticStyle,
    AdversarialStyle,
}

/// `Δ̂_t(𝒫_t) = {q ∈ Δ(𝒫_t) : (ĝ_i - b)ᵀ q <= 0 ∀i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSetSpec {
    pub model: ConfidenceModel,
    /// `c_i = ĝ_i - b`, pair-indexed, one vector per constraint.
    pub shifted: Vec<Vec<f64>>,
    pub mode: SettingLabel,
}

impl FeasibleSetSpec {
    /// Same set without the constraint rows.
    pub fn without_constraints(&self) -> Self {
        Self {
            model: self.model.clone(),
            shifted: Vec::new(),
            mode: self.mode,
        }
    }

    /// `max_i c_iᵀ q` for pair marginals `q`.
    pub fn max_residual(&self, pair_mass: &[f64]) -> f64 {
        self.shifted
            .iter()
            .map(|c| c.iter().zip(pair_mass).map(|(c, q)| c * q).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn build_feasible_spec(
    model: &ConfidenceModel,
    g_hat: &[Vec<f64>],
    bonus: &[f64],
    mode: SettingLabel,
) -> Result<FeasibleSetSpec> {
    let shifted = g_hat
        .iter()
        .map(|g| {
            if g.len() != bonus.len() {
                return Err(Error::structure("constraint estimate and bonus differ in shape"));
            }
            Ok(g.iter().zip(bonus).map(|(g, b)| g - b).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(FeasibleSetSpec {
        model: model.clone(),
        shifted,
        mode,
    })
}
