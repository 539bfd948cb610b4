//! Statistical fits computed from a run's snapshots and exit events.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::events::ExitEvent;
use crate::stats::{
    exit_statistics, fit_laplace, fit_power_law_tail_with, gibrat_regression, growth_rate_series,
    histories_from_snapshots, variance_size_scaling, AgeCensus, ExitStats, ExitStatsOptions, FirmKey, GibratFit,
    LaplaceFit, PowerLawFit, PowerLawOptions, VarianceSizeFit,
};

use super::config::ExperimentConfig;
use super::run::{ExperimentArtifacts, Snapshot};

/// A fit, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome<T> {
    Fitted { fit: T },
    Failed { reason: String },
}

impl<T> FitOutcome<T> {
    pub fn fit(&self) -> Option<&T> {
        match self {
            FitOutcome::Fitted { fit } => Some(fit),
            FitOutcome::Failed { .. } => None,
        }
    }
}

impl<T> From<Result<T>> for FitOutcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(fit) => FitOutcome::Fitted { fit },
            Err(e) => FitOutcome::Failed { reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Interval in snapshots.
    pub step: usize,
    /// Interval in periods.
    pub dt: u64,
    pub samples: usize,
    pub laplace: FitOutcome<LaplaceFit>,
    pub variance_size: FitOutcome<VarianceSizeFit>,
    pub gibrat: FitOutcome<GibratFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsReport {
    /// Period of the snapshot used for the tail fits.
    pub snapshot_t: Option<u64>,
    pub in_degree: FitOutcome<PowerLawFit>,
    pub in_weight: FitOutcome<PowerLawFit>,
    pub sales: FitOutcome<PowerLawFit>,
    pub growth: Vec<GrowthReport>,
    pub exits: FitOutcome<ExitStats>,
}

/// Exit-statistics options for a parameter set: ages in units of
/// `1 / rho_chg`, hazard tail from `mean_out_degree / rho_chg` on.
pub fn exit_options(config: &ExperimentConfig) -> ExitStatsOptions {
    let p = &config.params;
    let (age_unit, tail_start) = if p.rho_chg > 0.0 {
        (1.0 / p.rho_chg, p.mean_out_degree / p.rho_chg)
    } else {
        (1.0, 0.0)
    };
    ExitStatsOptions {
        age_unit,
        tail_start,
        ks_threshold: config.analysis.exit_ks_threshold,
        ..Default::default()
    }
}

/// Computes every fit. Failures are recorded per fit and never abort the
/// report.
pub fn analyze(
    config: &ExperimentConfig,
    snapshots: &[Snapshot],
    exits: &[ExitEvent],
    census: &AgeCensus,
    census_window: (u64, u64),
) -> FitsReport {
    let opts = &config.analysis;
    let pl = PowerLawOptions {
        bootstrap: opts.bootstrap,
        seed: config.seed,
        ..Default::default()
    };
    let last = snapshots.last();
    let tail = |f: fn(&crate::experiment::FirmRecord) -> f64, discrete: bool| -> FitOutcome<PowerLawFit> {
        match last {
            None => FitOutcome::Failed {
                reason: "no snapshots".into(),
            },
            Some(s) => {
                let x: Vec<f64> = s.firms.iter().map(f).collect();
                let o = PowerLawOptions {
                    discrete: Some(discrete),
                    ..pl.clone()
                };
                fit_power_law_tail_with(&x, &o).into()
            }
        }
    };

    let cross_sections: Vec<Vec<(FirmKey, f64)>> = snapshots
        .iter()
        .map(|s| s.firms.iter().map(|f| ((f.id, f.birth), f.sales)).collect())
        .collect();
    let histories = histories_from_snapshots(&cross_sections);
    let growth = opts
        .growth_steps
        .iter()
        .map(|&step| {
            let samples = growth_rate_series(&histories, step, opts.max_records);
            let rates: Vec<f64> = samples.iter().map(|g| g.rate).collect();
            GrowthReport {
                step,
                dt: step as u64 * config.stride,
                samples: samples.len(),
                laplace: fit_laplace(&rates, opts.laplace_window).into(),
                variance_size: variance_size_scaling(&samples, opts.min_per_bin).into(),
                gibrat: gibrat_regression(&histories, step).into(),
            }
        })
        .collect();

    FitsReport {
        snapshot_t: last.map(|s| s.t),
        in_degree: tail(|f| f.in_degree as f64, true),
        in_weight: tail(|f| f.in_weight, false),
        sales: tail(|f| f.sales, false),
        growth,
        exits: exit_statistics(exits, census, census_window, &exit_options(config)).into(),
    }
}

impl ExperimentArtifacts {
    pub fn fits(&self) -> FitsReport {
        analyze(
            &self.config,
            &self.snapshots,
            &self.events.exits,
            &self.census,
            self.census_window,
        )
    }
}
