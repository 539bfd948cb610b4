//! Estimators for firm demographics: power-law tails, growth-rate
//! distributions, variance-size scaling, Gibrat regressions, exit hazards,
//! and the nested-hierarchy test for steady-state networks.

pub mod exits;
pub mod growth;
pub mod hierarchy;
pub mod power_law;

pub use exits::{exit_statistics, AgeBin, AgeCensus, ExitStats, ExitStatsOptions};
pub use growth::{
    fit_laplace, gibrat_regression, growth_rate_series, histories_from_snapshots, variance_size_scaling, FirmHistory, FirmKey,
    GibratFit, GrowthSample, LaplaceFit, VarianceSizeFit,
};
pub use hierarchy::{nested_hierarchy_check, DegreeClass, HierarchyReport};
pub use power_law::{fit_power_law_tail, fit_power_law_tail_with, PowerLawFit, PowerLawOptions};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Two-sided p-value of `slope = 0`.
    pub p_value: f64,
    pub n: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Config("x and y differ in length".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} points for a regression")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("regressor has zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        p_value: t_p_value(slope / slope_se, nf - 2.0),
        n,
    })
}

pub(crate) fn t_p_value(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Minimizes a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Index of the base-`base` logarithmic bin holding `x >= 1`; values in
/// `[0, 1)` go to bin 0 together with `[1, base)`.
pub(crate) fn log_bin(x: f64, base: f64) -> usize {
    if x < base {
        0
    } else {
        (x.ln() / base.ln()).floor() as usize
    }
}
