//! Experiment runner: drives learners against environments, scores them with
//! the oracles and aggregates repeated runs.

mod aggregate;
mod config;
mod output;
mod svg;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{Greedy, OptCmdp, OptPrimalDual, PrimalDualParams};
use crate::cmdp::{compute_occupancy, CmdpInstance, Layout};
use crate::env::{instance_for, EnvSpec, Environment, ProcessSpec};
use crate::error::{Error, Result};
use crate::oracle::{
    compute_rho, pair_margins, safe_optimum, unconstrained_optimum, update_metrics, MetricStream,
    OracleValues,
};
use crate::solver::SolverSettings;
use crate::wcops::{Learner, LearnerEvent, Wcops, WcopsParams};

pub use aggregate::{aggregate, Band, Summary, SummaryEntry, METRICS};
pub use config::{preset, AlgorithmSpec, ExperimentConfig, PRESET_NAMES};
pub use output::{plot_dir, write_outputs};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads for independent runs; 0 or 1 runs sequentially.
    pub threads: usize,
    /// Solver diagnostics on stderr.
    pub debug_solver: bool,
}

/// Where `ρ` was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSource {
    TrueMeans,
    Emitted,
}

/// Everything recorded about one (algorithm, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub config_hash: String,
    pub oracle: OracleValues,
    pub rho_source: RhoSource,
    pub stream: MetricStream,
    pub events: Vec<LearnerEvent>,
    pub wall_clock_secs: f64,
    /// `π_t(·|x_0)` per episode, kept for single-state three-action instances.
    pub trajectory: Option<Vec<[f64; 3]>>,
    /// Set when the run failed; the other fields are then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    /// Event counts by kind.
    pub fn event_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            let kind = serde_json::to_value(e)
                .ok()
                .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
                .unwrap_or_default();
            *out.entry(kind).or_insert(0) += 1;
        }
        out
    }
}

/// Results of a whole experiment, records sorted by algorithm order then seed.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
}

impl ExperimentResult {
    pub fn records_for<'a>(&'a self, algorithm: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.algorithm == algorithm && r.error.is_none())
    }
}

fn build_learner(
    spec: &AlgorithmSpec,
    layout: &Layout,
    m: usize,
    config: &ExperimentConfig,
    rho_hint: f64,
    options: &RunOptions,
) -> Result<Box<dyn Learner>> {
    let (t, delta) = (config.horizon, config.delta);
    Ok(match spec {
        AlgorithmSpec::Wcops { eta, gamma } => {
            let mut params = WcopsParams::new(delta, t);
            params.eta = *eta;
            params.gamma = *gamma;
            let mut settings = SolverSettings::for_layers(layout.n_layers());
            settings.debug = options.debug_solver;
            params.settings = Some(settings);
            Box::new(Wcops::new(layout, m, &params)?)
        }
        AlgorithmSpec::OptCmdp { bonus_scale } => Box::new(OptCmdp::with_scale(
            layout,
            m,
            t,
            delta,
            bonus_scale.unwrap_or(1.0),
        )?),
        AlgorithmSpec::OptPrimalDual { rho_hat } => Box::new(OptPrimalDual::new(
            layout,
            m,
            &PrimalDualParams {
                delta,
                horizon: t,
                rho_hat: rho_hat.unwrap_or(rho_hint),
            },
        )?),
        AlgorithmSpec::Greedy => Box::new(Greedy::new(layout, m, t, delta)?),
    })
}

/// Margin of the instance judged from the configured cost vectors (means or
/// adversary starting points); used as the default margin hint.
fn configured_rho(instance: &CmdpInstance, env: &EnvSpec) -> f64 {
    let costs: Vec<Vec<f64>> = env
        .costs
        .iter()
        .map(|c| match c {
            ProcessSpec::Stochastic { mean } => mean.clone(),
            ProcessSpec::Adversarial { base, .. } => base.clone(),
        })
        .collect();
    compute_rho(instance, &pair_margins(&costs, instance.layout.n_pairs())).rho
}

/// Runs one algorithm for one seed.
pub fn run_single(
    config: &ExperimentConfig,
    instance: &CmdpInstance,
    spec: &AlgorithmSpec,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    let started = Instant::now();
    let layout = &instance.layout;
    let m = config.env.m();
    let n_pairs = layout.n_pairs();
    let mut learner = build_learner(spec, layout, m, config, configured_rho(instance, &config.env), options)?;
    let mut env = Environment::with_instance(&config.env, instance.clone(), config.horizon, seed);
    let g_means = config.env.cost_means();
    let mut stream = MetricStream::new(m, g_means.is_some());
    let keep_trajectory = layout.n_states() == 2 && layout.n_actions() == 3;
    let mut trajectory = keep_trajectory.then(|| Vec::with_capacity(config.horizon));

    let mut reward_sum = vec![0.0; n_pairs];
    let mut cost_sum = vec![vec![0.0; n_pairs]; m];
    let mut worst_margin = vec![f64::INFINITY; n_pairs];
    for _ in 0..config.horizon {
        let pi = learner.act();
        if let Some(tr) = trajectory.as_mut() {
            let row = pi.row(layout.initial_state());
            tr.push([row[0], row[1], row[2]]);
        }
        let emission = env.emit();
        let trace = env.play(&pi, &emission);
        let q = compute_occupancy(layout, &instance.transitions, &pi)?.pair_marginals(layout);
        update_metrics(&mut stream, &q, &emission.reward, &emission.costs, g_means.as_deref());
        for (s, r) in reward_sum.iter_mut().zip(&emission.reward) {
            *s += r;
        }
        for (sum, g) in cost_sum.iter_mut().zip(&emission.costs) {
            for (s, v) in sum.iter_mut().zip(g) {
                *s += v;
            }
        }
        for (w, v) in worst_margin.iter_mut().zip(pair_margins(&emission.costs, n_pairs)) {
            *w = w.min(v);
        }
        learner.observe(&trace)?;
    }

    let t = config.horizon as f64;
    let reward_bar: Vec<f64> = match &config.env.reward {
        ProcessSpec::Stochastic { mean } => mean.clone(),
        ProcessSpec::Adversarial { .. } => reward_sum.iter().map(|s| s / t).collect(),
    };
    let (g_bar, rho_source) = match &g_means {
        Some(means) => (means.clone(), RhoSource::TrueMeans),
        None => (
            cost_sum
                .iter()
                .map(|s| s.iter().map(|v| v / t).collect())
                .collect(),
            RhoSource::Emitted,
        ),
    };
    let opt_safe = match safe_optimum(instance, &g_bar, &reward_bar) {
        Ok((v, _)) => Some(v),
        Err(Error::Infeasible(_)) => None,
        Err(e) => return Err(e),
    };
    let rho = match rho_source {
        RhoSource::TrueMeans => compute_rho(instance, &pair_margins(&g_bar, n_pairs)),
        // Worst per-episode margin of each pair over the emitted costs.
        RhoSource::Emitted => compute_rho(instance, &worst_margin),
    };
    let oracle = OracleValues {
        opt_safe,
        opt: unconstrained_optimum(instance, &reward_bar),
        rho: rho.rho,
        alpha: rho.alpha,
    };
    Ok(RunRecord {
        algorithm: spec.label().to_string(),
        seed,
        config_hash: config.hash(),
        oracle,
        rho_source,
        stream,
        events: learner.events().to_vec(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        trajectory,
        error: None,
    })
}

/// Runs every configured algorithm for `reps` seeds `master_seed + rep`.
///
/// All algorithms see the same instance and the same seed per repetition.
/// A failing run is kept as a record with `error` set. The result does not
/// depend on `options.threads`.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentResult> {
    config.validate()?;
    let instance = instance_for(&config.env)?;
    let hash = config.hash();
    let jobs: Vec<(usize, u64)> = (0..config.algorithms.len())
        .flat_map(|a| (0..config.reps as u64).map(move |r| (a, r)))
        .collect();
    let run = |&(a, rep): &(usize, u64)| {
        let spec = &config.algorithms[a];
        let seed = config.master_seed.wrapping_add(rep);
        log::info!("{} seed {seed}", spec.label());
        run_single(config, &instance, spec, seed, options).unwrap_or_else(|e| {
            log::error!("{} seed {seed} failed: {e}", spec.label());
            RunRecord {
                algorithm: spec.label().to_string(),
                seed,
                config_hash: hash.clone(),
                oracle: OracleValues { opt_safe: None, opt: 0.0, rho: 0.0, alpha: 0.0 },
                rho_source: RhoSource::TrueMeans,
                stream: MetricStream::default(),
                events: Vec::new(),
                wall_clock_secs: 0.0,
                trajectory: None,
                error: Some(e.to_string()),
            }
        })
    };
    let records: Vec<RunRecord> = if options.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    Ok(ExperimentResult {
        config: config.clone(),
        records,
    })
}
