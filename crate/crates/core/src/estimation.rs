//! Per-episode statistics kept by the learner: visit counters, the
//! implicit-exploration loss estimate and the adaptive constraint estimator.
//!
//! The constraint estimate of pair `(x, a)` and constraint `i` is a weighted
//! mean of the costs observed at the visits of `(x, a)`. It is stored through
//! the incremental recursion
//!
//! ```text
//! g_hat <- (1 - beta) * g_hat + beta * g,   beta = (1 + Gamma_i) / N(x, a)
//! ```
//!
//! which unrolls to the product-form weights `beta_tau * prod_{h > tau} (1 - beta_h)`.
//! While `Gamma_i` stays at zero the estimate is the plain empirical mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cmdp::{EpisodeTrace, Layout, ProblemSizes};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CounterState {
    /// `N_t(x, a)`, pair-indexed.
    pub visits: Vec<u64>,
    /// `M_t(x' | x, a)`, triple-indexed.
    pub transitions: Vec<u64>,
}

impl CounterState {
    pub fn new(layout: &Layout) -> Self {
        Self {
            visits: vec![0; layout.n_pairs()],
            transitions: vec![0; layout.n_triples()],
        }
    }

    pub fn update(&mut self, layout: &Layout, trace: &EpisodeTrace) {
        for s in &trace.steps {
            self.visits[layout.pair(s.state, s.action)] += 1;
            self.transitions[layout.triple(s.state, s.action, layout.position(s.next_state))] += 1;
        }
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }
}

/// Functional form of [`CounterState::update`].
pub fn update_counters(layout: &Layout, state: &CounterState, trace: &EpisodeTrace) -> CounterState {
    let mut next = state.clone();
    next.update(layout, trace);
    next
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Violation threshold `C_t = 21 L |X| sqrt(2 t |A| ln(2 m T^2 |X| |A| / delta))`.
pub fn constraint_threshold(t: usize, sizes: &ProblemSizes, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if t == 0 {
        return Err(Error::parameter("episode index t must be at least 1"));
    }
    let x = sizes.states as f64;
    let a = sizes.actions as f64;
    let big_t = sizes.horizon as f64;
    let log_term = (2.0 * sizes.constraints.max(1) as f64 * big_t * big_t * x * a / delta).ln();
    Ok(21.0 * sizes.layers as f64 * x * (2.0 * t as f64 * a * log_term).sqrt())
}

/// Adaptive weighted estimator of the constraint costs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEstimator {
    /// `g_hat[i][pair]`
    g_hat: Vec<Vec<f64>>,
    /// Running `Σ_τ Σ_{x,a} g_{τ,i}(x,a) I_τ{x,a}` per constraint.
    cum_cost: Vec<f64>,
    /// `Γ_{t,i}` after the latest update.
    gamma: Vec<f64>,
    /// `C_t` after the latest update.
    threshold: f64,
}

/// What happened during one estimator update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorReport {
    /// Constraints whose `Γ` is strictly positive after the update.
    pub active_constraints: Vec<usize>,
    /// `(pair, constraint)` first visits that happened with `Γ > 0` (so `β > 1`).
    pub first_visits_with_gamma: Vec<(usize, usize)>,
}

impl ConstraintEstimator {
    pub fn new(layout: &Layout, m: usize) -> Self {
        Self {
            g_hat: vec![vec![0.0; layout.n_pairs()]; m],
            cum_cost: vec![0.0; m],
            gamma: vec![0.0; m],
            threshold: 0.0,
        }
    }

    pub fn g_hat(&self) -> &[Vec<f64>] {
        &self.g_hat
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn cum_cost(&self) -> &[f64] {
        &self.cum_cost
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Applies episode `t`'s feedback. `counters` must already include episode `t`.
    pub fn update(
        &mut self,
        layout: &Layout,
        trace: &EpisodeTrace,
        counters: &CounterState,
        t: usize,
        sizes: &ProblemSizes,
        delta: f64,
    ) -> Result<EstimatorReport> {
        let threshold = constraint_threshold(t, sizes, delta)?;
        self.threshold = threshold;
        for s in &trace.steps {
            for (acc, g) in self.cum_cost.iter_mut().zip(&s.costs) {
                *acc += g;
            }
        }
        for (gamma, &cum) in self.gamma.iter_mut().zip(&self.cum_cost) {
            *gamma = (cum - threshold).max(0.0).min(threshold);
        }
        let mut report = EstimatorReport {
            active_constraints: (0..self.gamma.len()).filter(|&i| self.gamma[i] > 0.0).collect(),
            ..Default::default()
        };
        for s in &trace.steps {
            let pair = layout.pair(s.state, s.action);
            let n = counters.visits[pair];
            debug_assert!(n >= 1, "counters must be updated before the estimator");
            for (i, &g) in s.costs.iter().enumerate() {
                let beta = (1.0 + self.gamma[i]) / n as f64;
                if n == 1 && self.gamma[i] > 0.0 {
                    report.first_visits_with_gamma.push((pair, i));
                }
                self.g_hat[i][pair] = weighted_step(self.g_hat[i][pair], beta, g);
            }
        }
        Ok(report)
    }

    pub fn snapshot(&self, layout: &Layout) -> EstimatorSnapshot {
        let mut g_hat = BTreeMap::new();
        for (x, a) in layout.active_pairs() {
            for (i, g) in self.g_hat.iter().enumerate() {
                g_hat.insert(format!("{x},{a},{i}"), g[layout.pair(x, a)]);
            }
        }
        EstimatorSnapshot {
            g_hat,
            gamma: self.gamma.clone(),
            cum_cost: self.cum_cost.clone(),
        }
    }
}

/// One estimator update `ĝ <- (1 - β) ĝ + β g`.
pub fn weighted_step(prev: f64, beta: f64, g: f64) -> f64 {
    (1.0 - beta) * prev + beta * g
}

/// Weights `w(τ) = β_τ Π_{h > τ} (1 - β_h)` of the visits of one pair, so
/// that the estimate after the last visit is `Σ_τ w(τ) g_τ`.
pub fn explicit_weights(betas: &[f64]) -> Vec<f64> {
    (0..betas.len())
        .map(|k| betas[k] * betas[k + 1..].iter().map(|b| 1.0 - b).product::<f64>())
        .collect()
}

/// JSON checkpoint of the estimator: `{"g_hat":{"x,a,i":v}, "gamma":[..], "cum_cost":[..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSnapshot {
    pub g_hat: BTreeMap<String, f64>,
    pub gamma: Vec<f64>,
    pub cum_cost: Vec<f64>,
}

/// Implicit-exploration loss estimate, pair-indexed:
/// `(1 - r_t(x,a)) / (u_t(x,a) + γ)` on visited pairs and 0 elsewhere.
pub fn estimate_loss(
    layout: &Layout,
    trace: &EpisodeTrace,
    upper_occupancy: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::parameter(format!(
            "implicit exploration gamma must be positive, got {gamma}"
        )));
    }
    let mut loss = vec![0.0; layout.n_pairs()];
    for s in &trace.steps {
        let pair = layout.pair(s.state, s.action);
        loss[pair] = (1.0 - s.reward) / (upper_occupancy[pair] + gamma);
    }
    Ok(loss)
}
