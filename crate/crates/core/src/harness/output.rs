//! Output directory layout.
//!
//! ```text
//! config.json         configuration that produced the run
//! summary.json        final values, per-seed oracle values and event counts
//! <algorithm>.csv     episode,metric,mean,ci_low,ci_high
//! trajectory.csv      policy at the initial state (three-action single-state instances)
//! <metric>.svg        one chart per metric
//! simplex.svg         trajectories on the simplex
//! timing.txt          wall-clock seconds per run (not reproducible)
//! ```
//!
//! Everything except `timing.txt` is a deterministic function of the configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::aggregate::{aggregate, Band, Summary, METRICS};
use super::config::ExperimentConfig;
use super::svg::{line_chart, simplex_chart};
use super::ExperimentResult;
use crate::env::{instance_for, ProcessSpec};
use crate::error::{Error, Result};
use crate::oracle::safe_optimum;

/// Points kept per trajectory in `trajectory.csv`.
const TRAJECTORY_POINTS: usize = 2000;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn metric_label(metric: &str) -> (&'static str, &'static str) {
    match metric {
        "regret" => ("Cumulative regret", "R_t"),
        "alpha_regret" => ("Cumulative alpha-regret", "alpha-R_t"),
        "violation" => ("Cumulative violation", "V_t"),
        _ => ("Cumulative positive violation", "positive V_t"),
    }
}

/// Writes every artifact of `result` into `dir` and returns the summary.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let mut config = result.config.clone();
    config.out_dir = None;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;

    let summary = aggregate(result);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;

    for (spec, entry) in config.algorithms.iter().zip(&summary.algorithms) {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", spec.slug()))).map_err(csv_err)?;
        w.write_record(["episode", "metric", "mean", "ci_low", "ci_high"]).map_err(csv_err)?;
        for (metric, band) in &entry.bands {
            for t in 0..band.mean.len() {
                w.serialize((t + 1, metric.as_str(), band.mean[t], band.lo[t], band.hi[t]))
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }

    let with_paths: Vec<_> = result.records.iter().filter(|r| r.trajectory.is_some()).collect();
    if !with_paths.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("trajectory.csv")).map_err(csv_err)?;
        w.write_record(["algorithm", "seed", "episode", "p0", "p1", "p2"]).map_err(csv_err)?;
        for r in with_paths {
            let path = r.trajectory.as_ref().expect("filtered");
            let stride = path.len().div_ceil(TRAJECTORY_POINTS).max(1);
            for (t, p) in path.iter().enumerate() {
                if t % stride == 0 || t + 1 == path.len() {
                    w.serialize((&r.algorithm, r.seed, t + 1, p[0], p[1], p[2])).map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
    }

    let mut timing = String::new();
    for r in &result.records {
        timing.push_str(&format!("{}\t{}\t{:.3}\n", r.algorithm, r.seed, r.wall_clock_secs));
    }
    fs::write(dir.join("timing.txt"), timing)?;

    plot_dir(dir)?;
    Ok(summary)
}

fn read_bands(path: &Path) -> Result<BTreeMap<String, Band>> {
    let mut out: BTreeMap<String, Band> = BTreeMap::new();
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    for row in r.deserialize::<(usize, String, f64, f64, f64)>() {
        let (_, metric, mean, lo, hi) = row.map_err(csv_err)?;
        let band = out.entry(metric).or_insert_with(|| Band {
            mean: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
            runs: 0,
        });
        band.mean.push(mean);
        band.lo.push(lo);
        band.hi.push(hi);
    }
    Ok(out)
}

/// First trajectory per algorithm, in file order.
fn read_trajectories(path: &Path) -> Result<Vec<(String, Vec<[f64; 3]>)>> {
    let mut out: Vec<(String, u64, Vec<[f64; 3]>)> = Vec::new();
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    for row in r.deserialize::<(String, u64, usize, f64, f64, f64)>() {
        let (alg, seed, _, p0, p1, p2) = row.map_err(csv_err)?;
        match out.iter_mut().find(|(a, _, _)| *a == alg) {
            Some((_, s, path)) if *s == seed => path.push([p0, p1, p2]),
            Some(_) => {}
            None => out.push((alg, seed, vec![[p0, p1, p2]])),
        }
    }
    Ok(out.into_iter().map(|(a, _, p)| (a, p)).collect())
}

/// Re-renders the charts of an output directory from its CSV files.
pub fn plot_dir(dir: &Path) -> Result<()> {
    let config = ExperimentConfig::from_json(&fs::read_to_string(dir.join("config.json"))?)?;
    let mut per_alg = Vec::new();
    for spec in &config.algorithms {
        let path = dir.join(format!("{}.csv", spec.slug()));
        if path.exists() {
            per_alg.push((spec.label(), read_bands(&path)?));
        }
    }
    for metric in METRICS {
        let series: Vec<(&str, &Band)> = per_alg
            .iter()
            .filter_map(|(name, bands)| bands.get(metric).map(|b| (*name, b)))
            .collect();
        if series.is_empty() {
            continue;
        }
        let (title, ylabel) = metric_label(metric);
        let title = format!("{title} ({})", config.name);
        fs::write(dir.join(format!("{metric}.svg")), line_chart(&title, ylabel, &series))?;
    }

    let traj_path = dir.join("trajectory.csv");
    if traj_path.exists() && config.env.m() == 1 {
        let trajectories = read_trajectories(&traj_path)?;
        let cost = match &config.env.costs[0] {
            ProcessSpec::Stochastic { mean } => mean,
            ProcessSpec::Adversarial { base, .. } => base,
        };
        let reward = match &config.env.reward {
            ProcessSpec::Stochastic { mean } => mean,
            ProcessSpec::Adversarial { base, .. } => base,
        };
        let g = [cost[0], cost[1], cost[2]];
        let instance = instance_for(&config.env)?;
        let optimum = safe_optimum(&instance, std::slice::from_ref(cost), reward)
            .ok()
            .map(|(_, q)| {
                let p = q.pair_marginals(&instance.layout);
                [p[0], p[1], p[2]]
            });
        let refs: Vec<(&str, &[[f64; 3]])> = trajectories
            .iter()
            .map(|(a, p)| (a.as_str(), p.as_slice()))
            .collect();
        let title = format!("Policy at the initial state ({})", config.name);
        fs::write(dir.join("simplex.svg"), simplex_chart(&title, &g, optimum, &refs))?;
    }
    Ok(())
}
