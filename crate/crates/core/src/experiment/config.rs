//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::state::InitSpec;

use super::phase::PhaseThresholds;

/// Parameter axes for a sweep. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub tau_p: Vec<f64>,
    pub tau_w: Vec<f64>,
    pub p_new: Vec<f64>,
    pub rho_chg: Vec<f64>,
    pub theta: Vec<f64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.tau_p.is_empty()
            && self.tau_w.is_empty()
            && self.p_new.is_empty()
            && self.rho_chg.is_empty()
            && self.theta.is_empty()
    }

    /// Cartesian product, ordered by (theta, tau_p, tau_w, p_new, rho_chg).
    pub fn points(&self, base: &ModelParams) -> Vec<ModelParams> {
        let axis = |v: &[f64], b: f64| if v.is_empty() { vec![b] } else { v.to_vec() };
        let mut out = Vec::new();
        for &theta in &axis(&self.theta, base.theta) {
            for &tau_p in &axis(&self.tau_p, base.tau_p) {
                for &tau_w in &axis(&self.tau_w, base.tau_w) {
                    for &p_new in &axis(&self.p_new, base.p_new) {
                        for &rho_chg in &axis(&self.rho_chg, base.rho_chg) {
                            out.push(ModelParams {
                                theta,
                                tau_p,
                                tau_w,
                                p_new,
                                rho_chg,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Options for the fits computed from a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub bootstrap: usize,
    pub laplace_window: (f64, f64),
    /// Snapshot intervals (multiples of the stride) for growth rates.
    pub growth_steps: Vec<usize>,
    pub max_records: usize,
    pub min_per_bin: usize,
    pub exit_ks_threshold: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            bootstrap: 200,
            laplace_window: (0.05, 0.5),
            growth_steps: vec![1, 10],
            max_records: 30,
            min_per_bin: 30,
            exit_ks_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub init: InitSpec,
    /// Periods simulated.
    pub horizon: u64,
    /// Periods discarded before statistics are collected.
    pub burn_in: u64,
    /// Periods between firm snapshots.
    pub stride: u64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub record_rewires: bool,
    pub snapshots: bool,
    /// Full state validation every this many periods; 0 disables it.
    pub check_every: u64,
    pub phase: PhaseThresholds,
    pub sweep: SweepGrid,
    pub analysis: AnalysisOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            init: InitSpec::default(),
            horizon: 10_000,
            burn_in: 1_000,
            stride: 1_000,
            seed: 0,
            out_dir: None,
            record_rewires: false,
            snapshots: true,
            check_every: 0,
            phase: PhaseThresholds::default(),
            sweep: SweepGrid::default(),
            analysis: AnalysisOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.horizon <= self.burn_in {
            return Err(Error::Config(format!(
                "horizon {} must exceed burn_in {}",
                self.horizon, self.burn_in
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        let (lo, hi) = self.analysis.laplace_window;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::Config(format!("bad laplace_window [{lo}, {hi}]")));
        }
        self.phase.validate()
    }

    /// Like [`validate`](Self::validate), and also requires a sweep grid.
    pub fn validate_sweep(&self) -> Result<()> {
        self.validate()?;
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        for p in self.sweep.points(&self.params) {
            p.validate()?;
        }
        Ok(())
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
