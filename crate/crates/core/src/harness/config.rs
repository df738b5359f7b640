//! Experiment configuration and the built-in presets.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EnvSpec, ProcessSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Wcops {
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        gamma: Option<f64>,
    },
    OptCmdp {
        /// Multiplies widths and bonuses (1 by default).
        #[serde(default)]
        bonus_scale: Option<f64>,
    },
    OptPrimalDual {
        /// Margin estimate for the dual cap; the oracle value of `ρ` by default.
        #[serde(default)]
        rho_hat: Option<f64>,
    },
    Greedy,
}

impl AlgorithmSpec {
    pub fn wcops() -> Self {
        AlgorithmSpec::Wcops { eta: None, gamma: None }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmSpec::Wcops { .. } => "WC-OPS",
            AlgorithmSpec::OptCmdp { .. } => "OptCMDP",
            AlgorithmSpec::OptPrimalDual { .. } => "OptPrimalDual",
            AlgorithmSpec::Greedy => "Greedy",
        }
    }

    /// File-name friendly label.
    pub fn slug(&self) -> &'static str {
        match self {
            AlgorithmSpec::Wcops { .. } => "wc-ops",
            AlgorithmSpec::OptCmdp { .. } => "optcmdp",
            AlgorithmSpec::OptPrimalDual { .. } => "optprimaldual",
            AlgorithmSpec::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    pub horizon: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.reps == 0 {
            return Err(Error::Parameter("reps must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Parameter("horizon must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Parameter("no algorithms configured".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].iter().any(|b| b.label() == a.label()) {
                return Err(Error::Parameter(format!("algorithm {} listed twice", a.label())));
            }
        }
        self.env.validate()
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const PRESET_NAMES: [&str; 4] = ["stochastic", "adv-reward", "adversarial", "simplex"];

/// Layer sizes of the multi-state presets: `L = 4`, `|X| = 9`.
const PRESET_LAYERS: [usize; 5] = [1, 2, 3, 2, 1];
const PRESET_ACTIONS: usize = 3;
const PRESET_CONSTRAINTS: usize = 2;
/// Reward adversary step of the adversarial presets. With the default
/// `1/sqrt(T)` every played reward saturates at 1 within a few hundred episodes.
const ADV_REWARD_STEP: f64 = 3e-4;

/// Mean profiles of the multi-state presets.
///
/// In every non-terminal state action 0 is safe for all constraints and pays
/// a reward drawn from `safe_reward`; the other actions have non-negative
/// costs and rewards in `[0.5, 0.85)`. Terminal entries are 0.
fn preset_profiles(seed: u64, safe_reward: std::ops::Range<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_states: usize = PRESET_LAYERS.iter().sum();
    let terminal = n_states - 1;
    let n_pairs = n_states * PRESET_ACTIONS;
    let mut reward = vec![0.0; n_pairs];
    let mut costs = vec![vec![0.0; n_pairs]; PRESET_CONSTRAINTS];
    for x in 0..terminal {
        for a in 0..PRESET_ACTIONS {
            let pair = x * PRESET_ACTIONS + a;
            if a == 0 {
                reward[pair] = round3(rng.random_range(safe_reward.clone()));
                for g in costs.iter_mut() {
                    g[pair] = round3(rng.random_range(-0.6..-0.3));
                }
            } else {
                reward[pair] = round3(rng.random_range(0.5..0.85));
                for g in costs.iter_mut() {
                    g[pair] = round3(rng.random_range(0.0..0.6));
                }
            }
        }
    }
    (reward, costs)
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn multi_state_config(name: &str, reward: ProcessSpec, costs: Vec<ProcessSpec>, algorithms: Vec<AlgorithmSpec>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        env: EnvSpec {
            layer_sizes: PRESET_LAYERS.to_vec(),
            actions: PRESET_ACTIONS,
            instance_seed: 2024,
            concentration: 1.0,
            reward,
            costs,
        },
        algorithms,
        horizon: 5000,
        reps: 10,
        master_seed: 1,
        delta: 0.01,
        out_dir: None,
    }
}

/// Built-in experiment presets.
///
/// - `stochastic`: Bernoulli rewards and costs;
/// - `adv-reward`: OGD reward adversary, Bernoulli costs;
/// - `adversarial`: OGD adversaries for rewards and costs, with a safe action
///   whose cost only decreases so the margin is positive;
/// - `simplex`: one state, three actions, one constraint.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    // The adversarial presets pay little on the safe action, so that keeping
    // the plug-in constraints exactly costs reward.
    let safe_reward = if name.starts_with("adv") { 0.05..0.3 } else { 0.6..0.8 };
    let (reward, costs) = preset_profiles(17, safe_reward);
    let stochastic_costs: Vec<ProcessSpec> = costs
        .iter()
        .map(|g| ProcessSpec::Stochastic { mean: g.clone() })
        .collect();
    match name {
        "stochastic" => Ok(multi_state_config(
            name,
            ProcessSpec::Stochastic { mean: reward },
            stochastic_costs,
            vec![
                AlgorithmSpec::wcops(),
                AlgorithmSpec::OptCmdp { bonus_scale: None },
                AlgorithmSpec::OptPrimalDual { rho_hat: None },
            ],
        )),
        "adv-reward" => Ok(multi_state_config(
            name,
            ProcessSpec::Adversarial { base: reward, step: Some(ADV_REWARD_STEP) },
            stochastic_costs,
            vec![
                AlgorithmSpec::wcops(),
                AlgorithmSpec::OptCmdp { bonus_scale: None },
                AlgorithmSpec::Greedy,
            ],
        )),
        "adversarial" => Ok(multi_state_config(
            name,
            ProcessSpec::Adversarial { base: reward, step: Some(ADV_REWARD_STEP) },
            costs
                .into_iter()
                .map(|g| ProcessSpec::Adversarial { base: g, step: None })
                .collect(),
            vec![AlgorithmSpec::wcops(), AlgorithmSpec::Greedy],
        )),
        "simplex" => Ok(ExperimentConfig {
            name: name.to_string(),
            env: EnvSpec {
                layer_sizes: vec![1, 1],
                actions: 3,
                instance_seed: 0,
                concentration: 1.0,
                reward: ProcessSpec::Stochastic {
                    mean: vec![0.9, 0.5, 0.1, 0.0, 0.0, 0.0],
                },
                costs: vec![ProcessSpec::Stochastic {
                    mean: vec![0.5, -0.5, -0.2, 0.0, 0.0, 0.0],
                }],
            },
            algorithms: vec![AlgorithmSpec::wcops()],
            horizon: 100_000,
            reps: 1,
            master_seed: 1,
            delta: 0.01,
            out_dir: None,
        }),
        other => Err(Error::Parameter(format!(
            "unknown preset {other:?}; expected one of {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}
