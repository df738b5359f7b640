//! Synthetic environments: random layered instances, Bernoulli reward and
//! cost processes, and OGD adversaries that react to the played policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::cmdp::{simulate_episode, CmdpInstance, EpisodeTrace, Layout, Policy, Transitions};
use crate::error::{Error, Result};

/// How one reward or cost vector is generated. Vectors are pair-indexed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProcessSpec {
    /// Independent Bernoulli draws with these means.
    Stochastic { mean: Vec<f64> },
    /// OGD adversary started at `base`; `step` defaults to `1/sqrt(T)`.
    Adversarial {
        base: Vec<f64>,
        #[serde(default)]
        step: Option<f64>,
    },
}

impl ProcessSpec {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, ProcessSpec::Stochastic { .. })
    }

    fn vector(&self) -> &[f64] {
        match self {
            ProcessSpec::Stochastic { mean } => mean,
            ProcessSpec::Adversarial { base, .. } => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub layer_sizes: Vec<usize>,
    pub actions: usize,
    /// Seed of the transition draw; the instance is shared by all repetitions.
    pub instance_seed: u64,
    /// Symmetric Dirichlet concentration of each transition row.
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    pub reward: ProcessSpec,
    pub costs: Vec<ProcessSpec>,
}

fn default_concentration() -> f64 {
    1.0
}

impl EnvSpec {
    pub fn m(&self) -> usize {
        self.costs.len()
    }

    pub fn layout(&self) -> Result<Layout> {
        Layout::from_sizes(&self.layer_sizes, self.actions)
    }

    pub fn constraints_stochastic(&self) -> bool {
        self.costs.iter().all(ProcessSpec::is_stochastic)
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.layout()?;
        if !(self.concentration > 0.0) {
            return Err(Error::Parameter("concentration must be positive".into()));
        }
        let check = |p: &ProcessSpec, lo: f64, hi: f64, what: &str| -> Result<()> {
            let v = p.vector();
            if v.len() != layout.n_pairs() {
                return Err(Error::Structure(format!(
                    "{what} vector has length {}, expected {}",
                    v.len(),
                    layout.n_pairs()
                )));
            }
            if v.iter().any(|x| !(*x >= lo && *x <= hi)) {
                return Err(Error::Parameter(format!("{what} entries must lie in [{lo}, {hi}]")));
            }
            if let ProcessSpec::Adversarial { step: Some(s), .. } = p {
                if !(*s >= 0.0) {
                    return Err(Error::Parameter(format!("{what} step must be non-negative")));
                }
            }
            Ok(())
        };
        check(&self.reward, 0.0, 1.0, "reward")?;
        for c in &self.costs {
            check(c, -1.0, 1.0, "cost")?;
        }
        Ok(())
    }

    /// True mean costs when every constraint is stochastic.
    pub fn cost_means(&self) -> Option<Vec<Vec<f64>>> {
        self.costs
            .iter()
            .map(|c| match c {
                ProcessSpec::Stochastic { mean } => Some(mean.clone()),
                ProcessSpec::Adversarial { .. } => None,
            })
            .collect()
    }
}

/// Draws one instance: each row is a normalized vector of `Gamma(concentration, 1)` draws.
pub fn generate_instance<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Result<CmdpInstance> {
    let layout = spec.layout()?;
    let gamma = Gamma::new(spec.concentration, 1.0)
        .map_err(|e| Error::Parameter(format!("bad concentration: {e}")))?;
    let mut p = vec![0.0; layout.n_triples()];
    for (x, a) in layout.active_pairs() {
        let row = layout.row(x, a);
        let draws: Vec<f64> = row.clone().map(|_| gamma.sample(rng).max(1e-300)).collect();
        let total: f64 = draws.iter().sum();
        for (t, d) in row.zip(draws) {
            p[t] = d / total;
        }
    }
    // renormalize so every row sums to one up to the last ulp
    for (x, a) in layout.active_pairs() {
        let row = layout.row(x, a);
        let rest: f64 = p[row.start..row.end - 1].iter().sum();
        p[row.end - 1] = (1.0 - rest).max(0.0);
    }
    let transitions = Transitions::new(&layout, p)?;
    CmdpInstance::new(layout, transitions, spec.m())
}

/// Instance for a spec, drawn from its own `instance_seed`.
pub fn instance_for(spec: &EnvSpec) -> Result<CmdpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.instance_seed);
    generate_instance(spec, &mut rng)
}

/// `reward(x,a) ~ Bernoulli(mean)`.
pub fn emit_bernoulli<R: Rng + ?Sized>(mean: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
        .collect()
}

/// `cost(x,a) = 2 Bernoulli((ḡ + 1) / 2) - 1`.
pub fn emit_signed_bernoulli<R: Rng + ?Sized>(mean: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .map(|&g| if rng.random::<f64>() < (g + 1.0) / 2.0 { 1.0 } else { -1.0 })
        .collect()
}

/// OGD adversary: gradient `-π(a|x) base(x,a)`, projected onto `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryState {
    pub param: Vec<f64>,
    pub base: Vec<f64>,
    pub step: f64,
    pub lo: f64,
    pub hi: f64,
}

impl AdversaryState {
    pub fn new(base: Vec<f64>, step: f64, lo: f64, hi: f64) -> Self {
        Self {
            param: base.iter().map(|v| v.clamp(lo, hi)).collect(),
            base,
            step,
            lo,
            hi,
        }
    }

    /// One OGD step against `last_policy`; returns the emitted vector.
    pub fn emit(&mut self, last_policy: &Policy) -> Vec<f64> {
        let probs = last_policy.as_slice();
        for ((p, b), pi) in self.param.iter_mut().zip(&self.base).zip(probs) {
            let grad = -pi * b;
            *p = (*p - self.step * grad).clamp(self.lo, self.hi);
        }
        self.param.clone()
    }
}

#[derive(Debug, Clone)]
enum Process {
    Bernoulli(Vec<f64>),
    SignedBernoulli(Vec<f64>),
    Adversary(AdversaryState),
}

impl Process {
    fn new(spec: &ProcessSpec, reward: bool, horizon: usize) -> Self {
        match spec {
            ProcessSpec::Stochastic { mean } if reward => Process::Bernoulli(mean.clone()),
            ProcessSpec::Stochastic { mean } => Process::SignedBernoulli(mean.clone()),
            ProcessSpec::Adversarial { base, step } => {
                let step = step.unwrap_or(1.0 / (horizon.max(1) as f64).sqrt());
                let (lo, hi) = if reward { (0.0, 1.0) } else { (-1.0, 1.0) };
                Process::Adversary(AdversaryState::new(base.clone(), step, lo, hi))
            }
        }
    }

    fn emit(&mut self, last_policy: Option<&Policy>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Process::Bernoulli(mean) => emit_bernoulli(mean, rng),
            Process::SignedBernoulli(mean) => emit_signed_bernoulli(mean, rng),
            Process::Adversary(adv) => match last_policy {
                Some(pi) => adv.emit(pi),
                None => adv.param.clone(),
            },
        }
    }
}

/// Vectors in force during one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub reward: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
}

/// One run's environment: instance, processes and two independent random streams.
#[derive(Debug, Clone)]
pub struct Environment {
    pub instance: CmdpInstance,
    reward: Process,
    costs: Vec<Process>,
    emission_rng: ChaCha8Rng,
    trajectory_rng: ChaCha8Rng,
    last_policy: Option<Policy>,
}

impl Environment {
    pub fn new(spec: &EnvSpec, horizon: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let instance = instance_for(spec)?;
        Ok(Self::with_instance(spec, instance, horizon, seed))
    }

    /// Uses a given instance instead of drawing one.
    pub fn with_instance(spec: &EnvSpec, instance: CmdpInstance, horizon: usize, seed: u64) -> Self {
        let mut emission_rng = ChaCha8Rng::seed_from_u64(seed);
        emission_rng.set_stream(0);
        let mut trajectory_rng = ChaCha8Rng::seed_from_u64(seed);
        trajectory_rng.set_stream(1);
        Self {
            instance,
            reward: Process::new(&spec.reward, true, horizon),
            costs: spec.costs.iter().map(|c| Process::new(c, false, horizon)).collect(),
            emission_rng,
            trajectory_rng,
            last_policy: None,
        }
    }

    /// Vectors for the next episode. Adversaries see only earlier policies.
    pub fn emit(&mut self) -> Emission {
        let last = self.last_policy.as_ref();
        let reward = self.reward.emit(last, &mut self.emission_rng);
        let costs = self
            .costs
            .iter_mut()
            .map(|c| c.emit(last, &mut self.emission_rng))
            .collect();
        Emission { reward, costs }
    }

    /// Plays `pi` against `emission`; the adversaries will react to `pi` next episode.
    pub fn play(&mut self, pi: &Policy, emission: &Emission) -> EpisodeTrace {
        let trace = simulate_episode(
            &self.instance,
            pi,
            &emission.reward,
            &emission.costs,
            &mut self.trajectory_rng,
        );
        self.last_policy = Some(pi.clone());
        trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize], actions: usize) -> EnvSpec {
        let n: usize = sizes.iter().sum::<usize>() * actions;
        EnvSpec {
            layer_sizes: sizes.to_vec(),
            actions,
            instance_seed: 7,
            concentration: 1.0,
            reward: ProcessSpec::Stochastic { mean: vec![0.5; n] },
            costs: vec![ProcessSpec::Stochastic { mean: vec![0.0; n] }],
        }
    }

    #[test]
    fn instances_are_valid_and_reproducible() {
        let s = spec(&[1, 3, 2, 1], 2);
        let a = instance_for(&s).unwrap();
        let b = instance_for(&s).unwrap();
        assert_eq!(a.transitions, b.transitions);
        a.transitions.validate(&a.layout).unwrap();
        let forced = instance_for(&spec(&[1, 1], 1)).unwrap();
        assert_eq!(forced.transitions.0, vec![1.0]);
    }

    #[test]
    fn degenerate_means_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(emit_bernoulli(&[1.0; 50], &mut rng).iter().all(|&r| r == 1.0));
        assert!(emit_signed_bernoulli(&[-1.0; 50], &mut rng).iter().all(|&g| g == -1.0));
    }

    #[test]
    fn adversary_moves_only_played_actions() {
        let layout = Layout::from_sizes(&[1, 1], 2).unwrap();
        let pi = Policy::deterministic(&layout, &[0, 0]).unwrap();
        let mut adv = AdversaryState::new(vec![0.5, 0.5, 0.0, 0.0], 0.1, 0.0, 1.0);
        let v = adv.emit(&pi);
        assert!((v[0] - 0.55).abs() < 1e-15);
        assert_eq!(v[1], 0.5);
        let mut still = AdversaryState::new(vec![0.0; 4], 0.1, 0.0, 1.0);
        assert_eq!(still.emit(&pi), vec![0.0; 4]);
        let mut capped = AdversaryState::new(vec![1.0, 0.0, 0.0, 0.0], 0.1, 0.0, 1.0);
        assert_eq!(capped.emit(&pi)[0], 1.0);
    }
}
