//! Classifies the macroeconomic regime of a simulated time series.

use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::run::TimeSeriesRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLabel {
    ConvergedEquilibrium,
    CyclicalSynchronized,
    ExcessDemand,
    Unclassified,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseLabel::ConvergedEquilibrium => "converged-equilibrium",
            PhaseLabel::CyclicalSynchronized => "cyclical-synchronized",
            PhaseLabel::ExcessDemand => "excess-demand",
            PhaseLabel::Unclassified => "unclassified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseThresholds {
    /// Bound on the terminal means of |inflation| and |excess supply|.
    pub convergence_tol: f64,
    /// Fraction of the series forming the terminal window.
    pub terminal_fraction: f64,
    /// Spectral peak over median power required for a cycle.
    pub peak_prominence: f64,
    /// Sign changes of inflation required for a cycle.
    pub min_crossings: usize,
    /// Fraction of sub-windows with inflation and unmet demand.
    pub persistence: f64,
    pub persistence_windows: usize,
    pub min_window: usize,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self {
            convergence_tol: 1e-8,
            terminal_fraction: 0.1,
            peak_prominence: 10.0,
            min_crossings: 4,
            persistence: 0.9,
            persistence_windows: 20,
            min_window: 64,
        }
    }
}

impl PhaseThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.convergence_tol > 0.0
            && self.terminal_fraction > 0.0
            && self.terminal_fraction <= 1.0
            && self.peak_prominence > 0.0
            && (0.0..=1.0).contains(&self.persistence)
            && self.persistence_windows > 0
            && self.min_window >= 4;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid phase thresholds {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub label: PhaseLabel,
    /// Larger of the terminal means of |inflation| and |excess supply|.
    pub convergence_score: f64,
    pub peak_prominence: f64,
    /// Period of the dominant excess-supply oscillation.
    pub peak_period: f64,
    /// Sign changes of inflation.
    pub inflation_crossings: usize,
    /// Fraction of sub-windows with positive inflation and unmet demand.
    pub demand_persistence: f64,
    pub mean_inflation: f64,
    pub mean_excess_supply: f64,
    pub mean_unmet_demand: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Dominant peak of the periodogram over its median, and the peak period.
fn spectral_peak(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mu = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    let (k, peak) = power
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc });
    let mut sorted = power.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let prominence = if median > 0.0 {
        peak / median
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (prominence, n as f64 / (k + 1) as f64)
}

/// Labels a post-burn-in series. Checks run in order: convergence, a
/// dominant excess-supply cycle with alternating inflation and deflation,
/// persistent inflation with rationed demand.
pub fn classify_phase(rows: &[TimeSeriesRow], th: &PhaseThresholds) -> Result<PhaseResult> {
    th.validate()?;
    let n = rows.len();
    if n < th.min_window {
        return Err(Error::InsufficientData(format!(
            "{n} periods, need at least {}",
            th.min_window
        )));
    }
    let inflation: Vec<f64> = rows.iter().map(|r| r.inflation).collect();
    let excess: Vec<f64> = rows.iter().map(|r| r.excess_supply).collect();
    let unmet: Vec<f64> = rows.iter().map(|r| r.unmet_demand).collect();

    let tail = ((n as f64 * th.terminal_fraction).ceil() as usize).clamp(1, n);
    let abs_mean = |x: &[f64]| x[n - tail..].iter().map(|v| v.abs()).sum::<f64>() / tail as f64;
    let convergence_score = abs_mean(&inflation).max(abs_mean(&excess));

    let (peak_prominence, peak_period) = spectral_peak(&excess);
    let inflation_crossings = inflation.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();

    let windows = th.persistence_windows.min(n);
    let width = n / windows;
    let demand_windows = (0..windows)
        .filter(|&w| {
            let r = w * width..(w + 1) * width;
            mean(&inflation[r.clone()]) > 0.0 && mean(&unmet[r]) > th.convergence_tol
        })
        .count();
    let demand_persistence = demand_windows as f64 / windows as f64;

    let label = if convergence_score <= th.convergence_tol {
        PhaseLabel::ConvergedEquilibrium
    } else if peak_prominence >= th.peak_prominence && inflation_crossings >= th.min_crossings {
        PhaseLabel::CyclicalSynchronized
    } else if demand_persistence >= th.persistence {
        PhaseLabel::ExcessDemand
    } else {
        PhaseLabel::Unclassified
    };
    Ok(PhaseResult {
        label,
        convergence_score,
        peak_prominence,
        peak_period,
        inflation_crossings,
        demand_persistence,
        mean_inflation: mean(&inflation),
        mean_excess_supply: mean(&excess),
        mean_unmet_demand: mean(&unmet),
    })
}
