use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use wcops_core::cmdp::{CmdpInstance, InstanceDoc};
use wcops_core::env::{instance_for, ProcessSpec};
use wcops_core::harness::{self, ExperimentConfig, RunOptions};
use wcops_core::oracle::{compute_rho, pair_margins, safe_optimum, unconstrained_optimum};

#[derive(Parser)]
#[command(name = "wcops", version, about = "Online learning in constrained episodic MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file or a preset name.
    Run {
        config: String,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of repetitions override.
        #[arg(long)]
        reps: Option<usize>,
        /// Horizon override.
        #[arg(long)]
        horizon: Option<usize>,
        /// Output directory (default: results/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Print one JSON line per solver call on stderr.
        #[arg(long)]
        debug_solver: bool,
    },
    /// Re-render the charts of a results directory.
    Plot { dir: PathBuf },
    /// Print OPT, the safe optimum, rho and alpha of an instance or config.
    Oracle { file: PathBuf },
    /// Check that an instance or config file is well formed.
    Validate { file: PathBuf },
    /// Print a built-in config (stochastic, adv-reward, adversarial, simplex).
    Preset { name: String },
}

enum Input {
    Config(Box<ExperimentConfig>),
    Instance(Box<InstanceDoc>),
}

fn load(path: &Path) -> Result<Input> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("algorithms").is_some() {
        Ok(Input::Config(Box::new(ExperimentConfig::from_json(&text)?)))
    } else {
        Ok(Input::Instance(Box::new(serde_json::from_value(value)?)))
    }
}

fn process_vector(p: &ProcessSpec) -> Vec<f64> {
    match p {
        ProcessSpec::Stochastic { mean } => mean.clone(),
        ProcessSpec::Adversarial { base, .. } => base.clone(),
    }
}

fn oracle_report(instance: &CmdpInstance, reward: Option<&[f64]>, costs: Option<&[Vec<f64>]>) -> Value {
    let mut out = serde_json::Map::new();
    if let Some(r) = reward {
        out.insert("opt".into(), json!(unconstrained_optimum(instance, r)));
    }
    if let Some(g) = costs {
        if let Some(r) = reward {
            let safe = safe_optimum(instance, g, r).ok().map(|(v, _)| v);
            out.insert("opt_safe".into(), json!(safe));
        }
        let rho = compute_rho(instance, &pair_margins(g, instance.layout.n_pairs()));
        out.insert("rho".into(), json!(rho.rho));
        out.insert("alpha".into(), json!(rho.alpha));
    }
    Value::Object(out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, seed, reps, horizon, out, parallel, debug_solver } => {
            let mut cfg = if Path::new(&config).exists() {
                match load(Path::new(&config))? {
                    Input::Config(c) => *c,
                    Input::Instance(_) => bail!("{config} is an instance file, not an experiment config"),
                }
            } else if harness::PRESET_NAMES.contains(&config.as_str()) {
                harness::preset(&config)?
            } else {
                bail!("{config}: no such file or preset");
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(n) = reps {
                cfg.reps = n;
            }
            if let Some(t) = horizon {
                cfg.horizon = t;
            }
            cfg.validate()?;
            let dir = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
            let result = harness::run_experiment(&cfg, &RunOptions { threads: parallel, debug_solver })?;
            let summary = harness::write_outputs(&result, &dir)?;
            for entry in &summary.algorithms {
                let finals: Vec<String> = entry
                    .final_values
                    .iter()
                    .map(|(k, v)| format!("{k}={:.3}", v.mean))
                    .collect();
                println!("{:<14} {}", entry.algorithm, finals.join(" "));
                for (s, e) in &entry.failures {
                    println!("{:<14} seed {s} failed: {e}", entry.algorithm);
                }
            }
            println!("wrote {}", dir.display());
        }
        Command::Plot { dir } => {
            harness::plot_dir(&dir)?;
            println!("rendered charts in {}", dir.display());
        }
        Command::Oracle { file } => {
            let report = match load(&file)? {
                Input::Config(cfg) => {
                    let instance = instance_for(&cfg.env)?;
                    let reward = process_vector(&cfg.env.reward);
                    let costs: Vec<Vec<f64>> = cfg.env.costs.iter().map(process_vector).collect();
                    oracle_report(&instance, Some(&reward), Some(&costs))
                }
                Input::Instance(doc) => {
                    let instance = doc.to_instance()?;
                    oracle_report(&instance, doc.rewards.as_deref(), doc.costs.as_deref())
                }
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Validate { file } => {
            match load(&file)? {
                Input::Config(cfg) => {
                    instance_for(&cfg.env)?;
                    println!("ok: experiment config {}", cfg.name);
                }
                Input::Instance(doc) => {
                    let instance = doc.to_instance()?;
                    let n = instance.layout.n_pairs();
                    if let Some(r) = &doc.rewards {
                        if r.len() != n {
                            bail!("rewards have {} entries, expected {n}", r.len());
                        }
                    }
                    if let Some(costs) = &doc.costs {
                        if costs.len() != instance.m || costs.iter().any(|g| g.len() != n) {
                            bail!("costs must be {} vectors of {n} entries", instance.m);
                        }
                    }
                    println!(
                        "ok: {} layers, {} states, {} actions",
                        instance.layout.n_layers(),
                        instance.layout.n_states(),
                        instance.layout.n_actions()
                    );
                }
            }
        }
        Command::Preset { name } => {
            println!("{}", serde_json::to_string_pretty(&harness::preset(&name)?)?);
        }
    }
    Ok(())
}
