//! Power-law tail fits: maximum likelihood exponent, `x_min` chosen by the
//! smallest Kolmogorov-Smirnov distance, goodness of fit by semi-parametric
//! bootstrap.
//!
//! Exponents are reported for the complementary cumulative distribution:
//! a density `x^-a` has ccdf exponent `a - 1`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::stream_rng;

pub const MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLawOptions {
    /// Bootstrap resamples for the p-value; 0 skips it.
    pub bootstrap: usize,
    pub seed: u64,
    /// Integer data uses the discrete approximation; `None` detects it.
    pub discrete: Option<bool>,
    /// Cap on the number of `x_min` candidates tried.
    pub max_candidates: usize,
    /// Smallest tail allowed.
    pub min_tail: usize,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        Self {
            bootstrap: 200,
            seed: 0,
            discrete: None,
            max_candidates: 200,
            min_tail: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Exponent of the complementary cumulative distribution.
    pub exponent: f64,
    pub exponent_se: f64,
    pub x_min: f64,
    pub ks: f64,
    /// Share of bootstrap samples fitting worse than the data.
    pub p_value: Option<f64>,
    pub n_tail: usize,
    pub n: usize,
    pub discrete: bool,
}

#[derive(Debug, Clone, Copy)]
struct CoreFit {
    /// Density exponent.
    alpha: f64,
    x_min: f64,
    ks: f64,
    n_tail: usize,
}

fn ks_continuous(tail: &[f64], x_min: f64, alpha: f64) -> f64 {
    let n = tail.len() as f64;
    let mut d = 0.0f64;
    for (j, &y) in tail.iter().enumerate() {
        let f = 1.0 - (y / x_min).powf(1.0 - alpha);
        d = d.max((j as f64 / n - f).abs()).max(((j + 1) as f64 / n - f).abs());
    }
    d
}

fn ks_discrete(tail: &[f64], x_min: f64, alpha: f64) -> f64 {
    let n = tail.len() as f64;
    let fit = |k: f64| 1.0 - ((k + 0.5) / (x_min - 0.5)).powf(1.0 - alpha);
    let mut d = 0.0f64;
    let mut j = 0;
    while j < tail.len() {
        let v = tail[j];
        let below = j as f64 / n;
        let mut e = j;
        while e < tail.len() && tail[e] == v {
            e += 1;
        }
        let upto = e as f64 / n;
        d = d.max((upto - fit(v)).abs());
        if v > x_min {
            d = d.max((below - fit(v - 1.0)).abs());
        }
        j = e;
    }
    d
}

fn fit_sorted(sorted: &[f64], discrete: bool, max_candidates: usize, min_tail: usize) -> Option<CoreFit> {
    let n = sorted.len();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + sorted[i].ln();
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || sorted[i] != sorted[i - 1]) && n - i >= min_tail)
        .collect();
    if candidates.len() > max_candidates && max_candidates > 0 {
        let c = candidates.len();
        candidates = (0..max_candidates).map(|q| candidates[q * c / max_candidates]).collect();
        candidates.dedup();
    }
    let mut best: Option<CoreFit> = None;
    for i in candidates {
        let x_min = sorted[i];
        let n_tail = n - i;
        let shift = if discrete { x_min - 0.5 } else { x_min };
        let log_sum = suffix[i] - n_tail as f64 * shift.ln();
        if !(log_sum > 0.0) {
            continue;
        }
        let alpha = 1.0 + n_tail as f64 / log_sum;
        let tail = &sorted[i..];
        let ks = if discrete {
            ks_discrete(tail, x_min, alpha)
        } else {
            ks_continuous(tail, x_min, alpha)
        };
        if best.is_none_or(|b| ks < b.ks) {
            best = Some(CoreFit { alpha, x_min, ks, n_tail });
        }
    }
    best
}

fn sample_tail<R: Rng>(rng: &mut R, fit: &CoreFit, discrete: bool) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let scale = u.powf(-1.0 / (fit.alpha - 1.0));
    if discrete {
        ((fit.x_min - 0.5) * scale + 0.5).floor()
    } else {
        fit.x_min * scale
    }
}

/// Fits with default options (200 bootstrap resamples, seed 0).
pub fn fit_power_law_tail(samples: &[f64]) -> Result<PowerLawFit> {
    fit_power_law_tail_with(samples, &PowerLawOptions::default())
}

/// Fits the tail of the positive entries of `samples`.
pub fn fit_power_law_tail_with(samples: &[f64], options: &PowerLawOptions) -> Result<PowerLawFit> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    if sorted.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} positive samples, need at least {MIN_SAMPLES}",
            sorted.len()
        )));
    }
    sorted.sort_by(f64::total_cmp);
    let discrete = options
        .discrete
        .unwrap_or_else(|| sorted.iter().all(|x| x.fract() == 0.0));
    let min_tail = options.min_tail.max(2);
    let fit = fit_sorted(&sorted, discrete, options.max_candidates, min_tail)
        .ok_or_else(|| Error::InsufficientData("no admissible x_min".into()))?;
    let n = sorted.len();

    let p_value = (options.bootstrap > 0).then(|| {
        let body = &sorted[..n - fit.n_tail];
        let tail_share = fit.n_tail as f64 / n as f64;
        let worse = (0..options.bootstrap)
            .into_par_iter()
            .filter(|&r| {
                let mut rng = stream_rng(options.seed, r as u64 + 1);
                let mut synth: Vec<f64> = (0..n)
                    .map(|_| {
                        if body.is_empty() || rng.random::<f64>() < tail_share {
                            sample_tail(&mut rng, &fit, discrete)
                        } else {
                            body[rng.random_range(0..body.len())]
                        }
                    })
                    .collect();
                synth.sort_by(f64::total_cmp);
                fit_sorted(&synth, discrete, options.max_candidates, min_tail).is_none_or(|b| b.ks >= fit.ks)
            })
            .count();
        worse as f64 / options.bootstrap as f64
    });

    Ok(PowerLawFit {
        exponent: fit.alpha - 1.0,
        exponent_se: (fit.alpha - 1.0) / (fit.n_tail as f64).sqrt(),
        x_min: fit.x_min,
        ks: fit.ks,
        p_value,
        n_tail: fit.n_tail,
        n,
        discrete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pareto(n: usize, ccdf_exponent: f64, x_min: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| x_min * (1.0 - rng.random::<f64>()).powf(-1.0 / ccdf_exponent))
            .collect()
    }

    fn no_bootstrap() -> PowerLawOptions {
        PowerLawOptions {
            bootstrap: 0,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_pareto_exponents() {
        for (seed, a) in [0.8, 1.0, 1.5, 2.5].into_iter().enumerate() {
            let x = pareto(100_000, a, 1.0, seed as u64);
            let fit = fit_power_law_tail_with(&x, &no_bootstrap()).unwrap();
            assert!((fit.exponent - a).abs() < 0.07, "{a}: {fit:?}");
            assert!(!fit.discrete);
        }
    }

    #[test]
    fn finds_x_min_above_a_uniform_body() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x: Vec<f64> = (0..5000).map(|_| rng.random_range(0.1..5.0)).collect();
        x.extend(pareto(5000, 1.2, 5.0, 5));
        let fit = fit_power_law_tail_with(&x, &no_bootstrap()).unwrap();
        assert!((fit.x_min - 5.0).abs() < 1.0, "{fit:?}");
        assert!((fit.exponent - 1.2).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn discrete_zipf_like_data() {
        // Integer parts of a shifted Pareto follow the approximate discrete law.
        let x: Vec<f64> = pareto(50_000, 1.0, 4.5, 7).into_iter().map(|v| (v + 0.5).floor()).collect();
        let fit = fit_power_law_tail_with(&x, &no_bootstrap()).unwrap();
        assert!(fit.discrete);
        assert!((fit.exponent - 1.0).abs() < 0.07, "{fit:?}");
    }

    #[test]
    fn pareto_is_not_rejected() {
        let x = pareto(2000, 1.1, 1.0, 9);
        let fit = fit_power_law_tail_with(
            &x,
            &PowerLawOptions {
                bootstrap: 100,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.p_value.unwrap() > 0.1, "{fit:?}");
    }

    #[test]
    fn exponential_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..5000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let fit = fit_power_law_tail_with(
            &x,
            &PowerLawOptions {
                bootstrap: 100,
                seed: 1,
                min_tail: 100,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.p_value.unwrap() < 0.1, "{fit:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let x = pareto(500, 1.3, 1.0, 3);
        let o = PowerLawOptions {
            bootstrap: 30,
            seed: 8,
            ..Default::default()
        };
        assert_eq!(fit_power_law_tail_with(&x, &o).unwrap(), fit_power_law_tail_with(&x, &o).unwrap());
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            fit_power_law_tail(&[1.0; 49]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn discrete_ks_matches_brute_force() {
        let tail = [3.0, 3.0, 4.0, 6.0, 6.0, 6.0, 9.0];
        let (x_min, alpha) = (3.0, 2.2);
        let fit = |k: f64| 1.0 - ((k + 0.5) / (x_min - 0.5)).powf(1.0 - alpha);
        let mut d = 0.0f64;
        for k in 3..=9 {
            let emp = tail.iter().filter(|&&v| v <= k as f64).count() as f64 / 7.0;
            d = d.max((emp - fit(k as f64)).abs());
        }
        assert!((ks_discrete(&tail, x_min, alpha) - d).abs() < 1e-15);
    }
}
