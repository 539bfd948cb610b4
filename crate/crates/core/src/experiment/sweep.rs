//! Phase diagrams: one classified run per grid point, in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

use super::config::ExperimentConfig;
use super::phase::{classify_phase, PhaseResult};
use super::run::run_experiment;

/// Environment variable holding the number of worker threads for sweeps.
pub const WORKERS_ENV: &str = "PRODNET_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub params: ModelParams,
    /// Classification, or the error that stopped the run.
    pub result: std::result::Result<PhaseResult, String>,
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn classify_point(config: &ExperimentConfig, params: ModelParams) -> SweepPoint {
    let cfg = ExperimentConfig {
        params: params.clone(),
        snapshots: false,
        sweep: Default::default(),
        ..config.clone()
    };
    let result = run_experiment(&cfg)
        .and_then(|a| classify_phase(a.measured_timeseries(), &cfg.phase))
        .map_err(|e| e.to_string());
    SweepPoint { params, result }
}

/// Runs and classifies every point of `config.sweep`, in grid order. A
/// failing point is reported in its entry and does not stop the sweep.
pub fn sweep_phase_diagram(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    sweep_phase_diagram_with(config, workers_from_env()?)
}

/// As [`sweep_phase_diagram`] with an explicit worker count; `None` uses
/// the global thread pool.
pub fn sweep_phase_diagram_with(config: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<SweepPoint>> {
    config.validate_sweep()?;
    let points = config.sweep.points(&config.params);
    let run = || -> Vec<SweepPoint> {
        points
            .into_par_iter()
            .map(|p| classify_point(config, p))
            .collect()
    };
    Ok(match workers {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
    })
}
