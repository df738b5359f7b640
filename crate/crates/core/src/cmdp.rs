//! Layered loop-free CMDP model, occupancy-measure algebra and episode simulation.
//!
//! States carry global ids `0..|X|` and are partitioned into layers
//! `X_0, ..., X_L` with singleton first and last layers. Three index spaces
//! are used throughout the crate:
//!
//! - **pairs** `(x, a)`: `x * |A| + a`, defined for every state (pairs of the
//!   terminal state exist but are never visited);
//! - **triples** `(x, a, x')` with `x in X_k`, `x' in X_{k+1}`: laid out layer by
//!   layer, state by state, action by action, successor by successor. The
//!   triples of one pair form a contiguous *row*;
//! - **states**.
//!
//! Transition models and occupancy measures are dense triple-indexed vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for transition rows and policy rows.
pub const ROW_TOL: f64 = 1e-12;

/// Default tolerance for occupancy validity checks.
pub const OCCUPANCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    layers: Vec<Vec<usize>>,
    n_actions: usize,
    layer_of: Vec<usize>,
    pos_in_layer: Vec<usize>,
    triple_offset: Vec<usize>,
    n_triples: usize,
}

impl Layout {
    /// Builds a layout from explicit state-id layers. Ids must be exactly `0..|X|`.
    pub fn new(layers: Vec<Vec<usize>>, n_actions: usize) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::structure("need at least two layers (L >= 1)"));
        }
        if layers[0].len() != 1 || layers[layers.len() - 1].len() != 1 {
            return Err(Error::structure("first and last layers must be singletons"));
        }
        if n_actions == 0 {
            return Err(Error::structure("action set is empty"));
        }
        let n_states: usize = layers.iter().map(Vec::len).sum();
        let mut layer_of = vec![usize::MAX; n_states];
        let mut pos_in_layer = vec![0; n_states];
        for (k, layer) in layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::structure(format!("layer {k} is empty")));
            }
            for (pos, &x) in layer.iter().enumerate() {
                if x >= n_states {
                    return Err(Error::structure(format!(
                        "state id {x} out of range 0..{n_states}"
                    )));
                }
                if layer_of[x] != usize::MAX {
                    return Err(Error::structure(format!("state id {x} appears twice")));
                }
                layer_of[x] = k;
                pos_in_layer[x] = pos;
            }
        }
        let mut triple_offset = vec![0; n_states];
        let mut offset = 0;
        for k in 0..layers.len() - 1 {
            let width = n_actions * layers[k + 1].len();
            for &x in &layers[k] {
                triple_offset[x] = offset;
                offset += width;
            }
        }
        let terminal = layers[layers.len() - 1][0];
        triple_offset[terminal] = offset;
        Ok(Self {
            layers,
            n_actions,
            layer_of,
            pos_in_layer,
            triple_offset,
            n_triples: offset,
        })
    }

    /// Layout with consecutive ids assigned layer by layer.
    pub fn from_sizes(layer_sizes: &[usize], n_actions: usize) -> Result<Self> {
        let mut next = 0;
        let layers = layer_sizes
            .iter()
            .map(|&n| {
                let layer: Vec<usize> = (next..next + n).collect();
                next += n;
                layer
            })
            .collect();
        Self::new(layers, n_actions)
    }

    /// Number of transitions per episode, `L`.
    pub fn n_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.layer_of.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states() * self.n_actions
    }

    pub fn n_triples(&self) -> usize {
        self.n_triples
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &[usize] {
        &self.layers[k]
    }

    pub fn layer_of(&self, x: usize) -> usize {
        self.layer_of[x]
    }

    pub fn position(&self, x: usize) -> usize {
        self.pos_in_layer[x]
    }

    pub fn initial_state(&self) -> usize {
        self.layers[0][0]
    }

    pub fn terminal_state(&self) -> usize {
        self.layers[self.layers.len() - 1][0]
    }

    pub fn is_terminal(&self, x: usize) -> bool {
        self.layer_of[x] == self.n_layers()
    }

    /// States of the layer following `x`'s layer. Empty for the terminal state.
    pub fn successors(&self, x: usize) -> &[usize] {
        let k = self.layer_of[x];
        if k + 1 < self.layers.len() {
            &self.layers[k + 1]
        } else {
            &[]
        }
    }

    pub fn pair(&self, x: usize, a: usize) -> usize {
        x * self.n_actions + a
    }

    pub fn pair_state(&self, pair: usize) -> usize {
        pair / self.n_actions
    }

    pub fn pair_action(&self, pair: usize) -> usize {
        pair % self.n_actions
    }

    /// Triple index of `(x, a, x')` where `x'` is given by its position in the next layer.
    pub fn triple(&self, x: usize, a: usize, succ_pos: usize) -> usize {
        self.triple_offset[x] + a * self.successors(x).len() + succ_pos
    }

    /// Contiguous triple range of the row `(x, a, ·)`.
    pub fn row(&self, x: usize, a: usize) -> Range<usize> {
        let width = self.successors(x).len();
        let start = self.triple_offset[x] + a * width;
        start..start + width
    }

    /// Triple range of every row leaving state `x`.
    pub fn state_rows(&self, x: usize) -> Range<usize> {
        let width = self.successors(x).len() * self.n_actions;
        self.triple_offset[x]..self.triple_offset[x] + width
    }

    /// Non-terminal pairs in layer order.
    pub fn active_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layers[..self.n_layers()]
            .iter()
            .flatten()
            .flat_map(move |&x| (0..self.n_actions).map(move |a| (x, a)))
    }

    /// Decodes a triple index into `(x, a, x')`.
    pub fn triple_parts(&self, triple: usize) -> (usize, usize, usize) {
        for (x, a) in self.active_pairs() {
            let row = self.row(x, a);
            if row.contains(&triple) {
                let pos = triple - row.start;
                return (x, a, self.successors(x)[pos]);
            }
        }
        panic!("triple index {triple} out of range");
    }

    /// Sums a triple-indexed vector into pair marginals `q(x, a)`.
    pub fn pair_marginals(&self, triples: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_pairs()];
        for (x, a) in self.active_pairs() {
            out[self.pair(x, a)] = triples[self.row(x, a)].iter().sum();
        }
        out
    }

    /// State marginals `q(x)`; the terminal state receives the inflow.
    pub fn state_marginals(&self, triples: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (x, a) in self.active_pairs() {
            let row = self.row(x, a);
            let mass: f64 = triples[row.clone()].iter().sum();
            out[x] += mass;
            if self.layer_of[x] + 1 == self.n_layers() {
                out[self.terminal_state()] += mass;
            }
        }
        out
    }

    /// Total mass arriving at each state from the previous layer.
    pub fn inflows(&self, triples: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (x, a) in self.active_pairs() {
            let succ = self.successors(x);
            for (j, t) in self.row(x, a).enumerate() {
                out[succ[j]] += triples[t];
            }
        }
        out
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::structure(format!(
                "{what} has length {got}, expected {want}"
            )));
        }
        Ok(())
    }
}

/// Transition function stored on triples: entry `(x, a, x')` is `P(x' | x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions(pub Vec<f64>);

impl Transitions {
    pub fn new(layout: &Layout, probs: Vec<f64>) -> Result<Self> {
        layout.check_len("transition vector", probs.len(), layout.n_triples())?;
        let t = Self(probs);
        t.validate(layout)?;
        Ok(t)
    }

    pub fn validate(&self, layout: &Layout) -> Result<()> {
        layout.check_len("transition vector", self.0.len(), layout.n_triples())?;
        for (x, a) in layout.active_pairs() {
            let row = &self.0[layout.row(x, a)];
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::Validation(format!(
                    "transition row ({x},{a}) has a negative or NaN entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::Validation(format!(
                    "transition row ({x},{a}) sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    pub fn row(&self, layout: &Layout, x: usize, a: usize) -> &[f64] {
        &self.0[layout.row(x, a)]
    }

    /// Transition rows with every row uniform over the next layer.
    pub fn uniform(layout: &Layout) -> Self {
        let mut probs = vec![0.0; layout.n_triples()];
        for (x, a) in layout.active_pairs() {
            let width = layout.successors(x).len() as f64;
            for t in layout.row(x, a) {
                probs[t] = 1.0 / width;
            }
        }
        Self(probs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmdpInstance {
    pub layout: Layout,
    pub transitions: Transitions,
    /// Number of constraints `m`.
    pub m: usize,
}

impl CmdpInstance {
    pub fn new(layout: Layout, transitions: Transitions, m: usize) -> Result<Self> {
        transitions.validate(&layout)?;
        Ok(Self {
            layout,
            transitions,
            m,
        })
    }

    pub fn to_doc(&self) -> InstanceDoc {
        let layout = &self.layout;
        let mut transitions = BTreeMap::new();
        for (x, a) in layout.active_pairs() {
            transitions.insert(
                format!("{x},{a}"),
                self.transitions.row(layout, x, a).to_vec(),
            );
        }
        InstanceDoc {
            num_layers: layout.n_layers(),
            layers: layout.layers().to_vec(),
            actions: layout.n_actions(),
            transitions,
            m: self.m,
            rewards: None,
            costs: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.to_instance()
    }
}

/// JSON document form of an instance.
///
/// `rewards` and `costs` are optional mean vectors (pair-indexed, one cost
/// vector per constraint) used by the oracle tooling; they are not part of the
/// learner-facing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    #[serde(rename = "L")]
    pub num_layers: usize,
    pub layers: Vec<Vec<usize>>,
    pub actions: usize,
    pub transitions: BTreeMap<String, Vec<f64>>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<Vec<f64>>>,
}

impl InstanceDoc {
    pub fn to_instance(&self) -> Result<CmdpInstance> {
        let layout = Layout::new(self.layers.clone(), self.actions)?;
        if layout.n_layers() != self.num_layers {
            return Err(Error::structure(format!(
                "\"L\" is {} but {} layers were given",
                self.num_layers,
                self.layers.len()
            )));
        }
        let mut probs = vec![f64::NAN; layout.n_triples()];
        for (key, row) in &self.transitions {
            let (x, a) = parse_pair_key(key)?;
            if x >= layout.n_states() || a >= layout.n_actions() || layout.is_terminal(x) {
                return Err(Error::structure(format!("transition key \"{key}\" out of range")));
            }
            let range = layout.row(x, a);
            if row.len() != range.len() {
                return Err(Error::structure(format!(
                    "transition row \"{key}\" has {} entries, next layer has {}",
                    row.len(),
                    range.len()
                )));
            }
            probs[range].copy_from_slice(row);
        }
        if let Some((x, a)) = layout
            .active_pairs()
            .find(|&(x, a)| probs[layout.row(x, a)].iter().any(|p| p.is_nan()))
        {
            return Err(Error::structure(format!("missing transition row \"{x},{a}\"")));
        }
        CmdpInstance::new(layout, Transitions(probs), self.m)
    }
}

fn parse_pair_key(key: &str) -> Result<(usize, usize)> {
    let bad = || Error::structure(format!("malformed key \"{key}\", expected \"x,a\""));
    let (x, a) = key.split_once(',').ok_or_else(bad)?;
    Ok((
        x.trim().parse().map_err(|_| bad())?,
        a.trim().parse().map_err(|_| bad())?,
    ))
}

/// Stationary Markov policy, one action distribution per state (pair-indexed).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(layout: &Layout, probs: Vec<f64>) -> Result<Self> {
        layout.check_len("policy", probs.len(), layout.n_pairs())?;
        let pi = Self {
            n_actions: layout.n_actions(),
            probs,
        };
        pi.validate()?;
        Ok(pi)
    }

    pub fn uniform(layout: &Layout) -> Self {
        Self {
            n_actions: layout.n_actions(),
            probs: vec![1.0 / layout.n_actions() as f64; layout.n_pairs()],
        }
    }

    /// Deterministic policy playing `choice[x]` in every state.
    pub fn deterministic(layout: &Layout, choice: &[usize]) -> Result<Self> {
        layout.check_len("action choice", choice.len(), layout.n_states())?;
        let mut probs = vec![0.0; layout.n_pairs()];
        for (x, &a) in choice.iter().enumerate() {
            if a >= layout.n_actions() {
                return Err(Error::structure(format!("action {a} out of range")));
            }
            probs[layout.pair(x, a)] = 1.0;
        }
        Ok(Self {
            n_actions: layout.n_actions(),
            probs,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (x, row) in self.probs.chunks(self.n_actions).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::Validation(format!("policy row {x} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::Validation(format!("policy row {x} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.n_actions + a]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.n_actions..(x + 1) * self.n_actions]
    }

    /// Pair-indexed probabilities.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }
}

/// Triple-indexed occupancy measure `q(x, a, x')`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure(pub Vec<f64>);

impl OccupancyMeasure {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Uniform measure: `1 / (|X_k| |A| |X_{k+1}|)` on every triple of layer `k`.
    pub fn uniform(layout: &Layout) -> Self {
        let mut q = vec![0.0; layout.n_triples()];
        for k in 0..layout.n_layers() {
            let value = 1.0
                / (layout.layer(k).len() * layout.n_actions() * layout.layer(k + 1).len()) as f64;
            for &x in layout.layer(k) {
                for t in layout.state_rows(x) {
                    q[t] = value;
                }
            }
        }
        Self(q)
    }

    pub fn pair_marginals(&self, layout: &Layout) -> Vec<f64> {
        layout.pair_marginals(&self.0)
    }

    pub fn state_marginals(&self, layout: &Layout) -> Vec<f64> {
        layout.state_marginals(&self.0)
    }

    /// Linear functional `Σ_{x,a} v(x,a) q(x,a)` for a pair-indexed vector.
    pub fn dot_pairs(&self, layout: &Layout, v: &[f64]) -> f64 {
        layout
            .pair_marginals(&self.0)
            .iter()
            .zip(v)
            .map(|(q, v)| q * v)
            .sum()
    }
}

/// Forward recursion `q(x,a,x') = q(x) π(a|x) P(x'|x,a)` starting from unit mass at `x_0`.
pub fn compute_occupancy(
    layout: &Layout,
    transitions: &Transitions,
    pi: &Policy,
) -> Result<OccupancyMeasure> {
    layout.check_len("transition vector", transitions.0.len(), layout.n_triples())?;
    layout.check_len("policy", pi.as_slice().len(), layout.n_pairs())?;
    let mut mass = vec![0.0; layout.n_states()];
    mass[layout.initial_state()] = 1.0;
    let mut q = vec![0.0; layout.n_triples()];
    for k in 0..layout.n_layers() {
        for &x in layout.layer(k) {
            if mass[x] == 0.0 {
                continue;
            }
            let succ = layout.successors(x);
            for a in 0..layout.n_actions() {
                let qa = mass[x] * pi.prob(x, a);
                for (j, t) in layout.row(x, a).enumerate() {
                    let v = qa * transitions.0[t];
                    q[t] = v;
                    mass[succ[j]] += v;
                }
            }
        }
    }
    Ok(OccupancyMeasure(q))
}

/// `π(a|x) = q(x,a) / q(x)`, uniform where `q(x) = 0`.
pub fn occupancy_to_policy(layout: &Layout, q: &OccupancyMeasure) -> Result<Policy> {
    let violations = validate_occupancy(layout, q, OCCUPANCY_TOL);
    if !violations.is_empty() {
        return Err(Error::Validation(format!(
            "occupancy measure is not valid: {}",
            violations[0]
        )));
    }
    Ok(policy_from_marginals(layout, &q.pair_marginals(layout)))
}

/// Policy from pair marginals without validity checks; negative round-off is clipped.
pub fn policy_from_marginals(layout: &Layout, pair_mass: &[f64]) -> Policy {
    let n_actions = layout.n_actions();
    let mut probs = vec![1.0 / n_actions as f64; layout.n_pairs()];
    for x in 0..layout.n_states() {
        if layout.is_terminal(x) {
            continue;
        }
        let row = &pair_mass[x * n_actions..(x + 1) * n_actions];
        let total: f64 = row.iter().map(|v| v.max(0.0)).sum();
        if total > 0.0 {
            for (a, v) in row.iter().enumerate() {
                probs[x * n_actions + a] = v.max(0.0) / total;
            }
        }
    }
    Policy { n_actions, probs }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OccupancyViolation {
    Shape { got: usize, expected: usize },
    Negative { triple: usize, value: f64 },
    /// Condition (i): per-layer total mass must equal one.
    LayerMass { layer: usize, mass: f64 },
    /// Condition (ii): outflow of an internal state must equal its inflow.
    FlowConservation { state: usize, inflow: f64, outflow: f64 },
}

impl fmt::Display for OccupancyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shape { got, expected } => {
                write!(f, "measure has {got} entries, expected {expected}")
            }
            Self::Negative { triple, value } => write!(f, "triple {triple} is negative ({value})"),
            Self::LayerMass { layer, mass } => {
                write!(f, "condition (i): layer {layer} carries mass {mass}")
            }
            Self::FlowConservation {
                state,
                inflow,
                outflow,
            } => write!(
                f,
                "condition (ii): state {state} has inflow {inflow} but outflow {outflow}"
            ),
        }
    }
}

/// Lists every violated validity condition (i)-(ii) and every entry below `-tol`.
pub fn validate_occupancy(
    layout: &Layout,
    q: &OccupancyMeasure,
    tol: f64,
) -> Vec<OccupancyViolation> {
    let mut out = Vec::new();
    if q.0.len() != layout.n_triples() {
        out.push(OccupancyViolation::Shape {
            got: q.0.len(),
            expected: layout.n_triples(),
        });
        return out;
    }
    for (t, &v) in q.0.iter().enumerate() {
        if !(v >= -tol) {
            out.push(OccupancyViolation::Negative { triple: t, value: v });
        }
    }
    for k in 0..layout.n_layers() {
        let mass: f64 = layout
            .layer(k)
            .iter()
            .map(|&x| q.0[layout.state_rows(x)].iter().sum::<f64>())
            .sum();
        if !((mass - 1.0).abs() <= tol) {
            out.push(OccupancyViolation::LayerMass { layer: k, mass });
        }
    }
    let inflow = layout.inflows(&q.0);
    for k in 1..layout.n_layers() {
        for &x in layout.layer(k) {
            let outflow: f64 = q.0[layout.state_rows(x)].iter().sum();
            if !((outflow - inflow[x]).abs() <= tol) {
                out.push(OccupancyViolation::FlowConservation {
                    state: x,
                    inflow: inflow[x],
                    outflow,
                });
            }
        }
    }
    out
}

/// One step of an episode: `(x_k, a_k, x_{k+1})` plus the bandit feedback at `(x_k, a_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<Step>,
}

impl EpisodeTrace {
    /// Pair indices visited during the episode, in order.
    pub fn visited_pairs<'a>(&'a self, layout: &'a Layout) -> impl Iterator<Item = usize> + 'a {
        self.steps.iter().map(|s| layout.pair(s.state, s.action))
    }

    /// Checks that the trace is a legal path of the layout.
    pub fn validate(&self, layout: &Layout, m: usize) -> Result<()> {
        if self.steps.len() != layout.n_layers() {
            return Err(Error::structure(format!(
                "trace has {} steps, expected {}",
                self.steps.len(),
                layout.n_layers()
            )));
        }
        let mut x = layout.initial_state();
        for (k, s) in self.steps.iter().enumerate() {
            if s.state != x || layout.layer_of(s.state) != k {
                return Err(Error::structure(format!("step {k} starts at the wrong state")));
            }
            if s.action >= layout.n_actions() || s.costs.len() != m {
                return Err(Error::structure(format!("step {k} has malformed feedback")));
            }
            if s.next_state >= layout.n_states() || layout.layer_of(s.next_state) != k + 1 {
                return Err(Error::structure(format!("step {k} skips a layer")));
            }
            x = s.next_state;
        }
        Ok(())
    }
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Plays `pi` for one episode against the true model.
///
/// `reward_vec` is pair-indexed; `cost_mat[i]` is the pair-indexed vector of constraint `i`.
pub fn simulate_episode<R: Rng + ?Sized>(
    instance: &CmdpInstance,
    pi: &Policy,
    reward_vec: &[f64],
    cost_mat: &[Vec<f64>],
    rng: &mut R,
) -> EpisodeTrace {
    let layout = &instance.layout;
    let mut steps = Vec::with_capacity(layout.n_layers());
    let mut x = layout.initial_state();
    for _ in 0..layout.n_layers() {
        let a = sample_index(rng, pi.row(x));
        let j = sample_index(rng, instance.transitions.row(layout, x, a));
        let next = layout.successors(x)[j];
        let pair = layout.pair(x, a);
        steps.push(Step {
            state: x,
            action: a,
            next_state: next,
            reward: reward_vec[pair],
            costs: cost_mat.iter().map(|g| g[pair]).collect(),
        });
        x = next;
    }
    EpisodeTrace { steps }
}

/// Size constants entering the confidence widths, bonuses and thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSizes {
    /// `L`
    pub layers: usize,
    /// `|X|`
    pub states: usize,
    /// `|A|`
    pub actions: usize,
    /// `m`
    pub constraints: usize,
    /// `T`
    pub horizon: usize,
}

impl ProblemSizes {
    pub fn of(layout: &Layout, m: usize, horizon: usize) -> Self {
        Self {
            layers: layout.n_layers(),
            states: layout.n_states(),
            actions: layout.n_actions(),
            constraints: m,
            horizon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> CmdpInstance {
        // {x0}, {s1, s2}, {xL}, one action
        let layout = Layout::from_sizes(&[1, 2, 1], 1).unwrap();
        let t = Transitions::new(&layout, vec![0.7, 0.3, 1.0, 1.0]).unwrap();
        CmdpInstance::new(layout, t, 1).unwrap()
    }

    #[test]
    fn chain_occupancy() {
        let inst = chain();
        let pi = Policy::uniform(&inst.layout);
        let q = compute_occupancy(&inst.layout, &inst.transitions, &pi).unwrap();
        let qa = q.pair_marginals(&inst.layout);
        assert!((qa[0] - 1.0).abs() < 1e-15);
        assert!((qa[1] - 0.7).abs() < 1e-15);
        assert!((qa[2] - 0.3).abs() < 1e-15);
        assert!(validate_occupancy(&inst.layout, &q, OCCUPANCY_TOL).is_empty());
    }

    #[test]
    fn deterministic_path_is_zero_one() {
        let layout = Layout::from_sizes(&[1, 2, 2, 1], 2).unwrap();
        let mut probs = vec![0.0; layout.n_triples()];
        for (x, a) in layout.active_pairs() {
            let r = layout.row(x, a);
            let w = r.len();
            probs[r.start + (x + a) % w] = 1.0;
        }
        let tr = Transitions::new(&layout, probs).unwrap();
        let pi = Policy::deterministic(&layout, &[1, 0, 1, 0, 1, 0]).unwrap();
        let q = compute_occupancy(&layout, &tr, &pi).unwrap();
        assert!(q.0.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(q.0.iter().filter(|&&v| v == 1.0).count(), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = CmdpInstance::new(layout.clone(), tr, 0).unwrap();
        let trace = simulate_episode(&inst, &pi, &vec![0.0; layout.n_pairs()], &[], &mut rng);
        for s in &trace.steps {
            let t = layout.triple(s.state, s.action, layout.position(s.next_state));
            assert_eq!(q.0[t], 1.0);
        }
    }

    #[test]
    fn policy_round_trip_and_uniform_default() {
        let layout = Layout::from_sizes(&[1, 2, 1], 2).unwrap();
        let mut q = vec![0.0; layout.n_triples()];
        // all mass through state 1, split evenly between actions
        q[layout.triple(0, 0, 0)] = 0.5;
        q[layout.triple(0, 1, 0)] = 0.5;
        q[layout.triple(1, 0, 0)] = 0.5;
        q[layout.triple(1, 1, 0)] = 0.5;
        let pi = occupancy_to_policy(&layout, &OccupancyMeasure(q)).unwrap();
        assert_eq!(pi.row(0), &[0.5, 0.5]);
        assert_eq!(pi.row(1), &[0.5, 0.5]);
        // unvisitable state 2 gets the uniform row
        assert_eq!(pi.row(2), &[0.5, 0.5]);
    }

    #[test]
    fn validation_reports_conditions() {
        let inst = chain();
        let pi = Policy::uniform(&inst.layout);
        let mut q = compute_occupancy(&inst.layout, &inst.transitions, &pi).unwrap();
        // layer 0 now carries 0.9 and s1 receives less than it emits
        q.0[0] = 0.6;
        let v = validate_occupancy(&inst.layout, &q, OCCUPANCY_TOL);
        assert!(v.iter().any(|e| matches!(e, OccupancyViolation::LayerMass { layer: 0, .. })));
        assert!(v
            .iter()
            .any(|e| matches!(e, OccupancyViolation::FlowConservation { state: 1, .. })));
        assert!(occupancy_to_policy(&inst.layout, &q).is_err());
    }

    #[test]
    fn single_transition_trace() {
        let layout = Layout::from_sizes(&[1, 1], 1).unwrap();
        let inst = CmdpInstance::new(layout.clone(), Transitions(vec![1.0]), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trace = simulate_episode(
            &inst,
            &Policy::uniform(&layout),
            &[0.4, 0.0],
            &[vec![-0.5, 0.0]],
            &mut rng,
        );
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].reward, 0.4);
        assert_eq!(trace.steps[0].costs, vec![-0.5]);
        trace.validate(&layout, 1).unwrap();
    }

    #[test]
    fn json_round_trip_is_exact() {
        let layout = Layout::from_sizes(&[1, 3, 1], 2).unwrap();
        let mut probs = Transitions::uniform(&layout).0;
        probs[0] = 0.1 + 0.2;
        probs[1] = 1.0 / 3.0;
        probs[2] = 1.0 - probs[0] - probs[1];
        let inst = CmdpInstance::new(layout, Transitions(probs), 2).unwrap();
        let text = inst.to_json().unwrap();
        let back = CmdpInstance::from_json(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn malformed_instances_are_rejected() {
        assert!(Layout::from_sizes(&[2, 1], 1).is_err());
        assert!(Layout::new(vec![vec![0], vec![0]], 1).is_err());
        let layout = Layout::from_sizes(&[1, 2, 1], 1).unwrap();
        assert!(Transitions::new(&layout, vec![0.5, 0.4, 1.0, 1.0]).is_err());
        assert!(Transitions::new(&layout, vec![0.5, 0.5, 1.0]).is_err());
        let bad = r#"{"L":2,"layers":[[0],[1,2],[3]],"actions":1,"transitions":{"0,0":[0.5,0.5],"1,0":[1.0]},"m":1}"#;
        assert!(CmdpInstance::from_json(bad).is_err());
        let wrong_shape = Policy::new(&layout, vec![1.0; 3]);
        assert!(matches!(wrong_shape, Err(Error::Structure(_))));
    }
}
