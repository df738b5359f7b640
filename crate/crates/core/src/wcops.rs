//! The WC-OPS learner: optimistic policy search over occupancy measures with
//! weighted constraint estimates.
//!
//! One episode of [`Wcops::observe`] runs, in order: the implicit-exploration
//! loss estimate (against the confidence set that was in force while the
//! episode was played), the counter and constraint-estimate updates, the new
//! confidence set and bonuses, and the mirror-descent step onto the
//! optimistically safe set.

use serde::{Deserialize, Serialize};

use crate::cmdp::{occupancy_to_policy, EpisodeTrace, Layout, OccupancyMeasure, Policy, ProblemSizes};
use crate::error::{Error, Result};
use crate::estimation::{estimate_loss, ConstraintEstimator, CounterState};
use crate::feasible::{
    bonus_vector, build_feasible_spec, upper_occupancy, ConfidenceModel, FeasibleSetSpec,
    SettingLabel,
};
use crate::solver::{solve_omd_step, OmdProblem, SolverError, SolverSettings};

/// Something a learner wants recorded in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerEvent {
    /// The constrained set was empty; the step ignored the constraints.
    InfeasibleFallback { episode: usize, min_residual: Option<f64> },
    /// The solver failed numerically; the step ignored the constraints.
    SolverFallback { episode: usize, message: String },
    /// Both attempts failed; the previous iterate was kept.
    StepSkipped { episode: usize, message: String },
    /// `Γ_i` became positive for the first time.
    GammaActivated { episode: usize, constraint: usize },
    /// A pair was visited for the first time while `Γ_i > 0`.
    FirstVisitWithGamma { episode: usize, pair: usize, constraint: usize },
}

/// Episode-level interface shared by WC-OPS and the baselines.
pub trait Learner: Send {
    fn name(&self) -> &str;
    /// Policy to play in the next episode.
    fn act(&self) -> Policy;
    /// Bandit feedback of the episode just played.
    fn observe(&mut self, trace: &EpisodeTrace) -> Result<()>;
    fn events(&self) -> &[LearnerEvent];
}

/// `η = γ = sqrt(L ln(L |X| |A| / δ) / (T |X| |A|))`.
pub fn default_learning_rate(sizes: &ProblemSizes, delta: f64) -> f64 {
    let xa = (sizes.states * sizes.actions) as f64;
    let l = sizes.layers as f64;
    (l * (l * xa / delta).ln() / (sizes.horizon as f64 * xa)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcopsParams {
    pub delta: f64,
    pub horizon: usize,
    /// Overrides the default step size.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Overrides the default implicit-exploration factor.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub settings: Option<SolverSettings>,
    #[serde(default = "default_mode")]
    pub mode: SettingLabel,
}

fn default_mode() -> SettingLabel {
    SettingLabel::StochasticStyle
}

impl WcopsParams {
    pub fn new(delta: f64, horizon: usize) -> Self {
        Self {
            delta,
            horizon,
            eta: None,
            gamma: None,
            settings: None,
            mode: SettingLabel::StochasticStyle,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Wcops {
    layout: Layout,
    sizes: ProblemSizes,
    delta: f64,
    eta: f64,
    gamma: f64,
    settings: SolverSettings,
    mode: SettingLabel,
    q_hat: OccupancyMeasure,
    policy: Policy,
    counters: CounterState,
    estimator: ConstraintEstimator,
    model: ConfidenceModel,
    bonus: Vec<f64>,
    episode: usize,
    last_upper: Vec<f64>,
    last_loss: Vec<f64>,
    events: Vec<LearnerEvent>,
}

impl Wcops {
    pub fn new(layout: &Layout, m: usize, params: &WcopsParams) -> Result<Self> {
        if !(params.delta > 0.0 && params.delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {}", params.delta)));
        }
        if params.horizon == 0 {
            return Err(Error::Parameter("horizon must be at least 1".into()));
        }
        let sizes = ProblemSizes::of(layout, m, params.horizon);
        let rate = default_learning_rate(&sizes, params.delta);
        let eta = params.eta.unwrap_or(rate);
        let gamma = params.gamma.unwrap_or(rate);
        if !(eta > 0.0 && gamma > 0.0) {
            return Err(Error::Parameter("eta and gamma must be positive".into()));
        }
        let counters = CounterState::new(layout);
        let model = ConfidenceModel::new(layout, &counters, &sizes, params.delta)?;
        let bonus = bonus_vector(&counters, &sizes, params.delta)?;
        let q_hat = OccupancyMeasure::uniform(layout);
        let policy = occupancy_to_policy(layout, &q_hat)?;
        Ok(Self {
            layout: layout.clone(),
            sizes,
            delta: params.delta,
            eta,
            gamma,
            settings: params
                .settings
                .unwrap_or_else(|| SolverSettings::for_layers(layout.n_layers())),
            mode: params.mode,
            q_hat,
            policy,
            counters,
            estimator: ConstraintEstimator::new(layout, m),
            model,
            bonus,
            episode: 0,
            last_upper: vec![0.0; layout.n_pairs()],
            last_loss: vec![0.0; layout.n_pairs()],
            events: Vec::new(),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Episodes observed so far.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn occupancy(&self) -> &OccupancyMeasure {
        &self.q_hat
    }

    pub fn counters(&self) -> &CounterState {
        &self.counters
    }

    pub fn estimator(&self) -> &ConstraintEstimator {
        &self.estimator
    }

    /// Confidence set built from the episodes observed so far.
    pub fn confidence(&self) -> &ConfidenceModel {
        &self.model
    }

    /// Bonuses built from the episodes observed so far.
    pub fn bonus(&self) -> &[f64] {
        &self.bonus
    }

    /// `u_t` used for the latest loss estimate.
    pub fn last_upper_occupancy(&self) -> &[f64] {
        &self.last_upper
    }

    pub fn last_loss(&self) -> &[f64] {
        &self.last_loss
    }

    /// Feasible set that constrains the next iterate.
    pub fn feasible_spec(&self) -> Result<FeasibleSetSpec> {
        build_feasible_spec(&self.model, self.estimator.g_hat(), &self.bonus, self.mode)
    }

    fn step(&self, spec: &FeasibleSetSpec, loss: &[f64]) -> Result<OccupancyMeasure, SolverError> {
        solve_omd_step(&OmdProblem {
            layout: &self.layout,
            loss,
            anchor: &self.q_hat,
            feasible: spec,
            eta: self.eta,
            settings: self.settings,
        })
        .map(|s| s.q)
    }
}

impl Learner for Wcops {
    fn name(&self) -> &str {
        "WC-OPS"
    }

    fn act(&self) -> Policy {
        self.policy.clone()
    }

    fn observe(&mut self, trace: &EpisodeTrace) -> Result<()> {
        trace.validate(&self.layout, self.sizes.constraints)?;
        self.episode += 1;
        let t = self.episode;

        let u = upper_occupancy(&self.layout, &self.model, &self.policy);
        let loss = estimate_loss(&self.layout, trace, &u, self.gamma)?;

        self.counters.update(&self.layout, trace);
        let was_active: Vec<bool> = self.estimator.gamma().iter().map(|&g| g > 0.0).collect();
        let report = self
            .estimator
            .update(&self.layout, trace, &self.counters, t, &self.sizes, self.delta)?;
        for &i in &report.active_constraints {
            if !was_active[i] {
                self.events.push(LearnerEvent::GammaActivated { episode: t, constraint: i });
            }
        }
        for &(pair, constraint) in &report.first_visits_with_gamma {
            log::warn!("episode {t}: pair {pair} first visited with positive Gamma for constraint {constraint}");
            self.events.push(LearnerEvent::FirstVisitWithGamma { episode: t, pair, constraint });
        }

        self.model = ConfidenceModel::new(&self.layout, &self.counters, &self.sizes, self.delta)?;
        self.bonus = bonus_vector(&self.counters, &self.sizes, self.delta)?;
        let spec = self.feasible_spec()?;

        let next = match self.step(&spec, &loss) {
            Ok(q) => Some(q),
            Err(err) => {
                match &err {
                    SolverError::Infeasible { min_residual } => {
                        log::info!("episode {t}: optimistic safe set is empty, dropping constraints");
                        self.events.push(LearnerEvent::InfeasibleFallback {
                            episode: t,
                            min_residual: Some(*min_residual),
                        });
                    }
                    other => {
                        log::warn!("episode {t}: constrained step failed: {other}");
                        self.events.push(LearnerEvent::SolverFallback {
                            episode: t,
                            message: other.to_string(),
                        });
                    }
                }
                match self.step(&spec.without_constraints(), &loss) {
                    Ok(q) => Some(q),
                    Err(err) => {
                        log::warn!("episode {t}: unconstrained step failed: {err}");
                        self.events.push(LearnerEvent::StepSkipped {
                            episode: t,
                            message: err.to_string(),
                        });
                        None
                    }
                }
            }
        };
        if let Some(q) = next {
            self.policy = occupancy_to_policy(&self.layout, &q)?;
            self.q_hat = q;
        }
        self.last_upper = u;
        self.last_loss = loss;
        Ok(())
    }

    fn events(&self) -> &[LearnerEvent] {
        &self.events
    }
}
