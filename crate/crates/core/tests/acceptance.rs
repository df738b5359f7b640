//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Runs the full presets, so it takes a few minutes in release mode.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wcops_core::cmdp::{
    compute_occupancy, CmdpInstance, EpisodeTrace, Layout, OccupancyMeasure, ProblemSizes, Step,
    Transitions,
};
use wcops_core::env::{instance_for, EnvSpec, Environment, ProcessSpec};
use wcops_core::estimation::{explicit_weights, weighted_step, ConstraintEstimator, CounterState};
use wcops_core::feasible::{ConfidenceModel, FeasibleSetSpec, SettingLabel};
use wcops_core::harness::{self, ExperimentConfig, ExperimentResult, RunOptions};
use wcops_core::oracle::{safe_optimum, unconstrained_optimum, update_metrics, MetricStream};
use wcops_core::solver::omd::{bregman, solve_omd_step, OmdProblem};
use wcops_core::solver::SolverSettings;
use wcops_core::wcops::{Learner, Wcops, WcopsParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn violation_bound(t: usize, s: &ProblemSizes, delta: f64) -> f64 {
    let (l, x, a, m, big_t) = dims(s);
    61.0 * l * x * (2.0 * t as f64 * a * (2.0 * m * big_t * big_t * x * a / delta).ln()).sqrt()
}

fn positive_violation_bound(t: usize, s: &ProblemSizes, delta: f64) -> f64 {
    let (l, x, a, m, big_t) = dims(s);
    18.0 * l * x * (2.0 * t as f64 * a * (2.0 * m * big_t * x * a / delta).ln()).sqrt()
}

fn regret_bound(s: &ProblemSizes, delta: f64) -> f64 {
    let (l, x, a, _, big_t) = dims(s);
    14.0 * l * x * x * (2.0 * big_t * a * (big_t * x * x * a / delta).ln()).sqrt()
}

fn dims(s: &ProblemSizes) -> (f64, f64, f64, f64, f64) {
    (
        s.layers as f64,
        s.states as f64,
        s.actions as f64,
        s.constraints.max(1) as f64,
        s.horizon as f64,
    )
}

fn single_step(x: usize, a: usize, next: usize, reward: f64, costs: Vec<f64>) -> EpisodeTrace {
    EpisodeTrace {
        steps: vec![Step { state: x, action: a, next_state: next, reward, costs }],
    }
}

fn estimator_identity() -> Outcome {
    let started = Instant::now();
    let layout = Layout::from_sizes(&[1, 1], 4).unwrap();
    let sizes = ProblemSizes::of(&layout, 1, 1_000_000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut gamma_seen = false;
    for _ in 0..1000 {
        let len = rng.random_range(1..60);
        let mut counters = CounterState::new(&layout);
        let mut est = ConstraintEstimator::new(&layout, 1);
        let mut sums = vec![0.0; layout.n_pairs()];
        for t in 1..=len {
            let a = rng.random_range(0..4);
            let g: f64 = rng.random_range(-1.0..1.0);
            sums[a] += g;
            let trace = single_step(0, a, 1, 0.0, vec![g]);
            counters.update(&layout, &trace);
            est.update(&layout, &trace, &counters, t, &sizes, 0.1).unwrap();
            gamma_seen |= est.gamma()[0] != 0.0;
        }
        for (a, sum) in sums.iter().enumerate() {
            let n = counters.visits[a];
            if n > 0 {
                worst = worst.max((est.g_hat()[0][a] - sum / n as f64).abs());
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && !gamma_seen && secs < 1.0,
        format!("max |g_hat - mean| = {worst:.2e}, {secs:.3} s"),
    )
}

fn weight_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut above_one = 0usize;
    for trial in 0..1000 {
        let len = rng.random_range(1..200);
        let betas: Vec<f64> = if trial % 2 == 0 {
            // (1 + Γ_j) / j with Γ nondecreasing in [0, 3]
            let mut gamma = 0.0f64;
            (1..=len)
                .map(|j| {
                    gamma = (gamma + rng.random_range(0.0..0.1)).min(3.0);
                    (1.0 + gamma) / j as f64
                })
                .collect()
        } else {
            (0..len).map(|_| rng.random_range(0.0..1.9)).collect()
        };
        above_one += betas.iter().filter(|&&b| b > 1.0).count();
        let g: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let folded = betas.iter().zip(&g).fold(0.0, |acc, (&b, &g)| weighted_step(acc, b, g));
        let direct: f64 = explicit_weights(&betas).iter().zip(&g).map(|(w, g)| w * g).sum();
        worst = worst.max((folded - direct).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && above_one > 0 && secs < 1.0,
        format!("max diff = {worst:.2e} ({above_one} weights above 1), {secs:.3} s"),
    )
}

fn omd_objective(loss: &[f64], anchor: &[f64], eta: f64, q: &[f64]) -> f64 {
    let lin: f64 = loss.iter().zip(q).map(|(l, q)| l * q).sum();
    lin + bregman(q, anchor).unwrap() / eta
}

/// Best feasible objective over a grid of step `h` on the simplex, plus
/// points of the same spacing on the constraint line.
fn brute_force(loss: &[f64], anchor: &[f64], eta: f64, c: &[f64]) -> f64 {
    let n = 1000usize;
    let h = 1.0 / n as f64;
    let mut best = f64::INFINITY;
    let mut consider = |q: [f64; 3]| {
        if q.iter().any(|&v| v < 0.0) {
            return;
        }
        if c.iter().zip(&q).map(|(c, q)| c * q).sum::<f64>() <= 1e-12 {
            best = best.min(omd_objective(loss, anchor, eta, &q));
        }
    };
    for i in 0..=n {
        for j in 0..=n - i {
            let (a, b) = (i as f64 * h, j as f64 * h);
            consider([a, b, (1.0 - a - b).max(0.0)]);
        }
    }
    // boundary c·q = 0, parametrized by each coordinate in turn
    for (k, i1, i2) in [(0, 1, 2), (1, 0, 2), (2, 0, 1)] {
        if (c[i1] - c[i2]).abs() < 1e-9 {
            continue;
        }
        for i in 0..=n {
            let qk = i as f64 * h;
            let q1 = (-c[k] * qk - c[i2] * (1.0 - qk)) / (c[i1] - c[i2]);
            let mut q = [0.0; 3];
            q[k] = qk;
            q[i1] = q1;
            q[i2] = 1.0 - qk - q1;
            consider(q);
        }
    }
    best
}

fn omd_oracle() -> Outcome {
    let started = Instant::now();
    let layout = Layout::from_sizes(&[1, 1], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_gap = 0.0f64;
    let mut worst_feas = 0.0f64;
    let mut binding = 0;
    let mut problems = 0;
    while problems < 50 {
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let anchor: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let loss3: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..3.0)).collect();
        let c3: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        if c3.iter().all(|&v| v >= 0.0) {
            continue;
        }
        problems += 1;
        let eta = rng.random_range(0.5..2.0);
        let mut loss = loss3.clone();
        loss.extend([0.0; 3]);
        let mut shifted = c3.clone();
        shifted.extend([0.0; 3]);
        let feasible = FeasibleSetSpec {
            model: ConfidenceModel::unconstrained(&layout),
            shifted: vec![shifted],
            mode: SettingLabel::StochasticStyle,
        };
        let anchor_q = OccupancyMeasure(anchor.clone());
        let sol = match solve_omd_step(&OmdProblem {
            layout: &layout,
            loss: &loss,
            anchor: &anchor_q,
            feasible: &feasible,
            eta,
            settings: SolverSettings::for_layers(1),
        }) {
            Ok(s) => s,
            Err(e) => {
                return outcome(
                    false,
                    format!("problem {problems} (loss {loss3:?}, anchor {anchor:?}, c {c3:?}, eta {eta}): solver failed: {e}"),
                )
            }
        };
        let q = &sol.q.0;
        let anchor_dot: f64 = c3.iter().zip(&anchor).map(|(c, p)| c * p).sum();
        if anchor_dot > 0.0 {
            binding += 1;
        }
        let residual = c3.iter().zip(q).map(|(c, q)| c * q).sum::<f64>();
        let simplex_err = (q.iter().sum::<f64>() - 1.0).abs();
        let negative = q.iter().fold(0.0f64, |m, &v| m.max(-v));
        worst_feas = worst_feas.max(residual.max(0.0)).max(simplex_err).max(negative);
        let value = omd_objective(&loss3, &anchor, eta, q);
        let best = brute_force(&loss3, &anchor, eta, &c3);
        worst_gap = worst_gap.max((value - best).abs()).max((sol.objective - best).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst_gap <= 1e-4 && worst_feas <= 1e-8 && secs < 30.0,
        format!(
            "{problems} problems ({binding} with infeasible anchor), max |obj - grid| = {worst_gap:.2e}, max infeasibility = {worst_feas:.2e}, {secs:.1} s"
        ),
    )
}

fn lp_oracle() -> Outcome {
    let layout = Layout::from_sizes(&[1, 1], 2).unwrap();
    let inst = CmdpInstance::new(layout.clone(), Transitions::uniform(&layout), 1).unwrap();
    let worked = safe_optimum(&inst, &[vec![0.5, -0.5, 0.0, 0.0]], &[1.0, 0.0, 0.0, 0.0])
        .map(|(v, _)| v)
        .unwrap_or(f64::NAN);
    let worked_ok = (worked - 0.5).abs() <= 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut dominance_ok = true;
    let mut worst_dp = 0.0f64;
    let mut checked = 0;
    for k in 0..100u64 {
        let depth = rng.random_range(1..4);
        let mut sizes = vec![1];
        sizes.extend((0..depth - 1).map(|_| rng.random_range(1..4)));
        sizes.push(1);
        let actions = rng.random_range(1..4);
        let n_states: usize = sizes.iter().sum();
        let n_pairs = n_states * actions;
        let terminal = n_states - 1;
        let mut reward = vec![0.0; n_pairs];
        let mut cost = vec![0.0; n_pairs];
        for p in 0..terminal * actions {
            reward[p] = rng.random_range(0.0..1.0);
            cost[p] = rng.random_range(-1.0..1.0);
        }
        let spec = EnvSpec {
            layer_sizes: sizes,
            actions,
            instance_seed: k,
            concentration: 1.0,
            reward: ProcessSpec::Stochastic { mean: reward.clone() },
            costs: vec![ProcessSpec::Stochastic { mean: cost.clone() }],
        };
        let inst = instance_for(&spec).unwrap();
        let dp = unconstrained_optimum(&inst, &reward);
        let lp = safe_optimum(&inst, &[], &reward).unwrap().0;
        worst_dp = worst_dp.max((dp - lp).abs());
        if let Ok((safe, _)) = safe_optimum(&inst, &[cost], &reward) {
            checked += 1;
            dominance_ok &= safe <= dp + 1e-9;
        }
    }
    outcome(
        worked_ok && dominance_ok && worst_dp <= 1e-9,
        format!(
            "worked OPT = {worked}, safe <= OPT on {checked} feasible instances: {dominance_ok}, max |DP - LP| = {worst_dp:.2e}"
        ),
    )
}

fn coverage() -> Outcome {
    let started = Instant::now();
    let delta = 0.1;
    let horizon = 500;
    let runs = 200;
    let reward = vec![0.7, 0.3, 0.4, 0.8, 0.6, 0.2, 0.0, 0.0];
    let cost = vec![0.2, -0.4, 0.5, -0.3, -0.1, 0.3, 0.0, 0.0];
    let spec = EnvSpec {
        layer_sizes: vec![1, 2, 1],
        actions: 2,
        instance_seed: 5,
        concentration: 1.0,
        reward: ProcessSpec::Stochastic { mean: reward },
        costs: vec![ProcessSpec::Stochastic { mean: cost.clone() }],
    };
    let instance = instance_for(&spec).unwrap();
    let layout = instance.layout.clone();
    let mut p_hits = 0;
    let mut g_hits = 0;
    for seed in 0..runs {
        let mut learner = Wcops::new(&layout, 1, &WcopsParams::new(delta, horizon)).unwrap();
        let mut env = Environment::with_instance(&spec, instance.clone(), horizon, seed);
        let mut p_ok = true;
        let mut g_ok = true;
        for _ in 0..horizon {
            let pi = learner.act();
            let emission = env.emit();
            let trace = env.play(&pi, &emission);
            learner.observe(&trace).unwrap();
            p_ok &= learner.confidence().contains(&layout, &instance.transitions);
            let b = learner.bonus();
            g_ok &= (0..layout.n_pairs()).all(|p| (learner.estimator().g_hat()[0][p] - cost[p]).abs() <= b[p]);
        }
        p_hits += p_ok as usize;
        g_hits += g_ok as usize;
    }
    let sigma = (delta * (1.0 - delta) / runs as f64).sqrt();
    let need = 1.0 - delta - 3.0 * sigma;
    let (fp, fg) = (p_hits as f64 / runs as f64, g_hits as f64 / runs as f64);
    outcome(
        fp >= need && fg >= need,
        format!(
            "P covered in {fp:.3}, costs covered in {fg:.3} of {runs} runs (need {need:.3}), {:.0} s",
            started.elapsed().as_secs_f64()
        ),
    )
}

fn run(cfg: &ExperimentConfig) -> ExperimentResult {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    harness::run_experiment(cfg, &RunOptions { threads, debug_solver: false }).unwrap()
}

fn stochastic_bounds(result: &ExperimentResult) -> (Outcome, Outcome) {
    let cfg = &result.config;
    let instance = instance_for(&cfg.env).unwrap();
    let sizes = ProblemSizes::of(&instance.layout, cfg.env.m(), cfg.horizon);
    let mut v_ok = true;
    let mut pv_ok = true;
    let mut r_ok = true;
    let mut v_ratio = 0.0f64;
    let mut pv_ratio = 0.0f64;
    let mut r_ratio = f64::NEG_INFINITY;
    let mut runs = 0;
    for rec in result.records_for("WC-OPS") {
        runs += 1;
        let cum = rec.stream.cumulative(&rec.oracle);
        for (t, v) in cum.violation.iter().enumerate() {
            let bound = violation_bound(t + 1, &sizes, cfg.delta);
            v_ok &= *v <= bound;
            v_ratio = v_ratio.max(v / bound);
        }
        match &cum.positive_violation {
            Some(pv) => {
                for (t, v) in pv.iter().enumerate() {
                    let bound = positive_violation_bound(t + 1, &sizes, cfg.delta);
                    pv_ok &= *v <= bound;
                    pv_ratio = pv_ratio.max(v / bound);
                }
            }
            None => pv_ok = false,
        }
        match cum.regret.as_ref().and_then(|r| r.last()) {
            Some(&r) => {
                let bound = regret_bound(&sizes, cfg.delta);
                r_ok &= r <= bound;
                r_ratio = r_ratio.max(r / bound);
            }
            None => r_ok = false,
        }
    }
    let complete = runs == cfg.reps;
    let summary = harness::aggregate(result);
    let band = summary.entry("WC-OPS").and_then(|e| e.band("regret"));
    let growth = band.map(|b| b.mean[b.mean.len() - 1] / b.mean[b.mean.len() / 2 - 1]);
    let growth_ok = growth.is_some_and(|g| g <= 1.6);
    (
        outcome(
            complete && v_ok && pv_ok,
            format!(
                "{runs} runs, max V_t/bound = {v_ratio:.4}, max positive V_t/bound = {pv_ratio:.4}"
            ),
        ),
        outcome(
            complete && r_ok && growth_ok,
            format!(
                "max R_T/bound = {r_ratio:.4}, averaged R_T/R_(T/2) = {:.3}",
                growth.unwrap_or(f64::NAN)
            ),
        ),
    )
}

/// Replays the WC-OPS runs of a stochastic experiment step by step, checking
/// that the optimistic occupancy dominates the true one whenever the true
/// transitions lie in the confidence set.
fn dominance(result: &ExperimentResult) -> Outcome {
    let cfg = &result.config;
    let instance = instance_for(&cfg.env).unwrap();
    let layout = &instance.layout;
    let m = cfg.env.m();
    let g_means = cfg.env.cost_means();
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut same_runs = true;
    for rec in result.records_for("WC-OPS") {
        let mut params = WcopsParams::new(cfg.delta, cfg.horizon);
        params.settings = Some(SolverSettings::for_layers(layout.n_layers()));
        let mut learner = Wcops::new(layout, m, &params).unwrap();
        let mut env = Environment::with_instance(&cfg.env, instance.clone(), cfg.horizon, rec.seed);
        let mut stream = MetricStream::new(m, g_means.is_some());
        for _ in 0..cfg.horizon {
            let pi = learner.act();
            let inside = learner.confidence().contains(layout, &instance.transitions);
            let emission = env.emit();
            let trace = env.play(&pi, &emission);
            let q = compute_occupancy(layout, &instance.transitions, &pi)
                .unwrap()
                .pair_marginals(layout);
            update_metrics(&mut stream, &q, &emission.reward, &emission.costs, g_means.as_deref());
            learner.observe(&trace).unwrap();
            if inside {
                checked += 1;
                let u = learner.last_upper_occupancy();
                worst = worst.max(q.iter().zip(u).map(|(q, u)| q - u).fold(f64::NEG_INFINITY, f64::max));
            } else {
                skipped += 1;
            }
        }
        same_runs &= stream == rec.stream;
    }
    outcome(
        same_runs && checked > 0 && worst <= 1e-12,
        format!(
            "{checked} episodes checked ({skipped} with P outside the set), max q - u = {worst:.2e}, replay matches harness: {same_runs}"
        ),
    )
}

fn adversarial(result: &ExperimentResult) -> Outcome {
    let cfg = &result.config;
    let instance = instance_for(&cfg.env).unwrap();
    let sizes = ProblemSizes::of(&instance.layout, cfg.env.m(), cfg.horizon);
    let mut ok = true;
    let mut rho_min = f64::INFINITY;
    let mut v_ratio = 0.0f64;
    let mut r_ratio = f64::NEG_INFINITY;
    let mut runs = 0;
    for rec in result.records_for("WC-OPS") {
        runs += 1;
        rho_min = rho_min.min(rec.oracle.rho);
        let cum = rec.stream.cumulative(&rec.oracle);
        for (t, v) in cum.violation.iter().enumerate() {
            let bound = violation_bound(t + 1, &sizes, cfg.delta);
            ok &= *v <= bound;
            v_ratio = v_ratio.max(v / bound);
        }
        let r = *cum.alpha_regret.last().unwrap();
        let bound = regret_bound(&sizes, cfg.delta);
        ok &= r <= bound;
        r_ratio = r_ratio.max(r / bound);
    }
    let summary = harness::aggregate(result);
    let final_alpha = |alg: &str| {
        summary
            .entry(alg)
            .and_then(|e| e.final_values.get("alpha_regret"))
            .map(|v| v.mean)
            .unwrap_or(f64::NAN)
    };
    let (ours, greedy) = (final_alpha("WC-OPS"), final_alpha("Greedy"));
    outcome(
        ok && runs == cfg.reps && rho_min > 0.0 && ours < greedy,
        format!(
            "{runs} runs, min rho = {rho_min:.3}, max alpha-R_T/bound = {r_ratio:.4}, max V_t/bound = {v_ratio:.4}, averaged alpha-R_T: WC-OPS {ours:.1} vs Greedy {greedy:.1}"
        ),
    )
}

fn simplex(result: &ExperimentResult) -> Outcome {
    let g = match &result.config.env.costs[0] {
        ProcessSpec::Stochastic { mean } => mean.clone(),
        ProcessSpec::Adversarial { base, .. } => base.clone(),
    };
    let Some(rec) = result.records_for("WC-OPS").next() else {
        return outcome(false, "no WC-OPS run");
    };
    let Some(path) = rec.trajectory.as_ref() else {
        return outcome(false, "no trajectory recorded");
    };
    let start = path.len() - path.len() / 10;
    let worst = path[start..]
        .iter()
        .map(|p| p.iter().zip(&g).map(|(p, g)| p * g).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let last = path[path.len() - 1];
    outcome(
        worst <= 0.05,
        format!(
            "max g·pi over the last {} iterates = {worst:.4}, final pi = ({:.3}, {:.3}, {:.3})",
            path.len() - start,
            last[0],
            last[1],
            last[2]
        ),
    )
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<String> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "timing.txt")
        .collect();
    names.sort();
    let mut other: Vec<String> = fs::read_dir(b)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "timing.txt")
        .collect();
    other.sort();
    if names != other {
        return Err(format!("file sets differ: {names:?} vs {other:?}"));
    }
    for n in &names {
        if fs::read(a.join(n)).map_err(|e| e.to_string())? != fs::read(b.join(n)).map_err(|e| e.to_string())? {
            return Err(format!("{n} differs"));
        }
    }
    Ok(names.len())
}

fn main() -> ExitCode {
    // optional criterion numbers on the command line select a subset
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    if wanted(1) {
        report(1, "estimator identity", estimator_identity());
    }
    if wanted(2) {
        report(2, "weight/recursion equivalence", weight_equivalence());
    }
    if wanted(3) {
        report(3, "mirror-descent step vs grid", omd_oracle());
    }
    if wanted(4) {
        report(4, "LP oracle", lp_oracle());
    }
    if wanted(5) {
        report(5, "confidence coverage", coverage());
    }

    let preset_for = |n: usize| match n {
        6 | 7 | 9 => Some("stochastic"),
        8 => Some("adversarial"),
        10 => Some("simplex"),
        _ => None,
    };
    let rerun_all = wanted(11);
    let tmp = tempfile::tempdir().unwrap();
    let mut first_runs = Vec::new();
    for name in harness::PRESET_NAMES {
        let needed = rerun_all || (6..=10).any(|n| wanted(n) && preset_for(n) == Some(name));
        if !needed {
            continue;
        }
        let cfg = harness::preset(name).unwrap();
        let result = run(&cfg);
        let dir = tmp.path().join(format!("{name}-a"));
        harness::write_outputs(&result, &dir).unwrap();
        match name {
            "stochastic" => {
                if wanted(6) || wanted(7) {
                    let (c6, c7) = stochastic_bounds(&result);
                    if wanted(6) {
                        report(6, "violation bounds", c6);
                    }
                    if wanted(7) {
                        report(7, "regret bound and growth", c7);
                    }
                }
                if wanted(9) {
                    report(9, "optimistic occupancy dominance", dominance(&result));
                }
            }
            "adversarial" if wanted(8) => {
                report(8, "adversarial bounds and comparison", adversarial(&result))
            }
            "simplex" if wanted(10) => report(10, "simplex convergence", simplex(&result)),
            _ => {}
        }
        first_runs.push((name, cfg, dir));
    }

    if rerun_all {
        let mut repro = true;
        let mut details = Vec::new();
        for (name, cfg, dir) in &first_runs {
            let again = tmp.path().join(format!("{name}-b"));
            harness::write_outputs(&run(cfg), &again).unwrap();
            match compare_dirs(dir, &again) {
                Ok(n) => details.push(format!("{name}: {n} files identical")),
                Err(e) => {
                    details.push(format!("{name}: {e}"));
                    repro = false;
                }
            }
        }
        report(11, "reproducibility", outcome(repro, details.join(", ")));
    }

    results.sort_by_key(|(n, _, _)| *n);
    let failed: Vec<_> = results.iter().filter(|(_, _, o)| !o.pass).map(|(n, _, _)| *n).collect();
    if failed.is_empty() {
        println!("all {} criteria run passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
