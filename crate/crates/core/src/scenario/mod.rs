//! Scenario configuration, presets, Monte-Carlo execution and CSV output.

mod config;
mod csv;
mod presets;

pub use config::{BackoffParams, Experiment, Hyperparams, Perturbation, Protocol, RunLength, ScenarioConfig};
pub use csv::{config_hash, emit_csv, format_sig, summary_csv, trace_csv};
pub use presets::{preset, Preset, PRESETS};

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{pf_spread, MetricsTrace};
use crate::engine::run_trial;
use crate::error::{Error, Result};

/// Environment variable holding the number of worker threads for trials.
pub const WORKERS_ENV: &str = "DLCA_WORKERS";

/// Trial-averaged trace bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanTick {
    pub index: usize,
    pub end_time_s: f64,
    pub throughput_bps: f64,
    pub collisions: f64,
    pub idle: f64,
    pub pf_ratio: Vec<f64>,
    /// Trial mean of `max b / min b`.
    pub pf_spread: f64,
}

/// Means over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub throughput_bps: f64,
    /// Mean over trials in which no AP was starved.
    pub utility: Option<f64>,
    pub starved_trials: usize,
    pub collisions_per_txop: f64,
    pub idle_per_txop: f64,
    pub collision_slots: f64,
    pub idle_slots: f64,
    pub success_slots: f64,
    pub ticks: Vec<MeanTick>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub trials: Vec<MetricsTrace>,
    pub mean: MeanMetrics,
    /// Host time spent; never written to CSV.
    pub wall_clock_s: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl MeanMetrics {
    pub fn from_trials(trials: &[MetricsTrace]) -> Self {
        let utilities: Vec<f64> = trials.iter().filter_map(|t| t.utility).collect();
        let n_ticks = trials.iter().map(|t| t.ticks.len()).min().unwrap_or(0);
        let ticks = (0..n_ticks)
            .map(|k| {
                let at = |f: &dyn Fn(&MetricsTrace) -> f64| mean(trials.iter().map(f));
                let width = trials[0].ticks[k].pf_ratio.len();
                MeanTick {
                    index: k,
                    end_time_s: trials[0].ticks[k].end_time_s,
                    throughput_bps: at(&|t| t.ticks[k].throughput_bps),
                    collisions: at(&|t| t.ticks[k].collisions as f64),
                    idle: at(&|t| t.ticks[k].idle as f64),
                    pf_ratio: (0..width).map(|ap| at(&|t| t.ticks[k].pf_ratio[ap])).collect(),
                    pf_spread: at(&|t| pf_spread(&t.ticks[k].pf_ratio)),
                }
            })
            .collect();
        Self {
            throughput_bps: mean(trials.iter().map(|t| t.throughput_bps)),
            utility: (!utilities.is_empty()).then(|| mean(utilities.iter().copied())),
            starved_trials: trials.len() - utilities.len(),
            collisions_per_txop: mean(trials.iter().map(|t| t.collisions_per_txop)),
            idle_per_txop: mean(trials.iter().map(|t| t.idle_per_txop)),
            collision_slots: mean(trials.iter().map(|t| t.collision_slots as f64)),
            idle_slots: mean(trials.iter().map(|t| t.idle_slots as f64)),
            success_slots: mean(trials.iter().map(|t| t.success_slots as f64)),
            ticks,
        }
    }
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Runs every trial of `config` (in parallel) and averages them, with the
/// worker count taken from [`WORKERS_ENV`]. The result depends only on
/// the config, never on the worker count.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    run_scenario_with(config, workers_from_env()?)
}

/// [`run_scenario`] on `workers` threads, or rayon's global pool for `None`.
pub fn run_scenario_with(config: &ScenarioConfig, workers: Option<usize>) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let run = || -> Result<Vec<MetricsTrace>> {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|k| run_trial(config, k))
            .collect()
    };
    let trials = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(RunReport {
        config: config.clone(),
        mean: MeanMetrics::from_trials(&trials),
        trials,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

/// Runs every point of an experiment in order.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<RunReport>> {
    run_experiment_with(exp, workers_from_env()?)
}

pub fn run_experiment_with(exp: &Experiment, workers: Option<usize>) -> Result<Vec<RunReport>> {
    exp.validate()?;
    exp.points().iter().map(|c| run_scenario_with(c, workers)).collect()
}
