//! Growth-rate statistics on firm size histories.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{golden_section, ols, t_p_value};
use crate::error::{Error, Result};

/// Firm identity across snapshots: slot and period of entry.
pub type FirmKey = (usize, u64);

/// Sizes of one firm at consecutive snapshots starting at `first`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmHistory {
    pub key: FirmKey,
    pub first: usize,
    pub sizes: Vec<f64>,
}

/// Groups snapshot cross-sections into per-firm histories. A firm missing
/// from a snapshot starts a new history when it reappears.
pub fn histories_from_snapshots(snapshots: &[Vec<(FirmKey, f64)>]) -> Vec<FirmHistory> {
    let mut open: HashMap<FirmKey, usize> = HashMap::new();
    let mut out: Vec<FirmHistory> = Vec::new();
    for (s, snap) in snapshots.iter().enumerate() {
        let mut next = HashMap::with_capacity(snap.len());
        for &(key, size) in snap {
            let idx = match open.get(&key) {
                Some(&h) if out[h].first + out[h].sizes.len() == s => h,
                _ => {
                    out.push(FirmHistory {
                        key,
                        first: s,
                        sizes: Vec::new(),
                    });
                    out.len() - 1
                }
            };
            out[idx].sizes.push(size);
            next.insert(key, idx);
        }
        open = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    /// Size at the start of the interval.
    pub size: f64,
    /// `ln(s_t / s_{t - dt})`.
    pub rate: f64,
}

/// Log growth rates over `step` snapshots, keeping the last `max_records`
/// rates per firm. Intervals with a nonpositive size are skipped.
pub fn growth_rate_series(histories: &[FirmHistory], step: usize, max_records: usize) -> Vec<GrowthSample> {
    let step = step.max(1);
    let mut out = Vec::new();
    for h in histories {
        let rates: Vec<GrowthSample> = (step..h.sizes.len())
            .filter_map(|i| {
                let (a, b) = (h.sizes[i - step], h.sizes[i]);
                (a > 0.0 && b > 0.0).then(|| GrowthSample {
                    size: a,
                    rate: (b / a).ln(),
                })
            })
            .collect();
        let skip = rates.len().saturating_sub(max_records);
        out.extend_from_slice(&rates[skip..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub b_plus: f64,
    pub b_minus: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub window: (f64, f64),
    /// Log-likelihood of the two-sided exponential on the window.
    pub loglik_laplace: f64,
    /// Log-likelihood of a two-sided half-normal (one scale per side).
    pub loglik_gaussian: f64,
}

impl LaplaceFit {
    pub fn laplace_preferred(&self) -> bool {
        self.loglik_laplace > self.loglik_gaussian
    }
}

/// `E[y - lo]` for an exponential of rate `b` truncated to `[lo, lo + w]`.
fn truncated_mean(b: f64, w: f64) -> f64 {
    let z = b * w;
    if z.abs() < 1e-6 {
        w / 2.0 - b * w * w / 12.0
    } else {
        1.0 / b - w / z.exp_m1()
    }
}

/// Maximum-likelihood rate of an exponential truncated to `[lo, hi]`.
fn truncated_exponential_rate(y: &[f64], lo: f64, hi: f64) -> f64 {
    let mean = y.iter().map(|v| v - lo).sum::<f64>() / y.len() as f64;
    if hi.is_infinite() {
        return 1.0 / mean;
    }
    let w = hi - lo;
    // truncated_mean decreases in b from w (b -> -inf) to 0 (b -> inf).
    let (mut a, mut b) = (-1.0 / w, 1.0 / w);
    while truncated_mean(a, w) < mean {
        a *= 2.0;
    }
    while truncated_mean(b, w) > mean {
        b *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if truncated_mean(mid, w) > mean {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn exponential_loglik(y: &[f64], lo: f64, hi: f64, b: f64) -> f64 {
    let n = y.len() as f64;
    let s: f64 = y.iter().map(|v| v - lo).sum();
    let w = hi - lo;
    let log_norm = if hi.is_infinite() {
        b.ln()
    } else if (b * w).abs() < 1e-12 {
        -w.ln()
    } else {
        // ln(b / (1 - e^{-b w})), valid for either sign of b.
        (b / -(-b * w).exp_m1()).ln()
    };
    n * log_norm - b * s
}

fn half_normal_loglik(y: &[f64], lo: f64, hi: f64, sigma: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    let mass = std.cdf(hi / sigma) - std.cdf(lo / sigma);
    let n = y.len() as f64;
    let ss: f64 = y.iter().map(|v| v * v).sum();
    -n * (sigma * (2.0 * std::f64::consts::PI).sqrt() * mass).ln() - ss / (2.0 * sigma * sigma)
}

fn best_half_normal(y: &[f64], lo: f64, hi: f64) -> f64 {
    let scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    let ln_sigma = golden_section(
        |s| -half_normal_loglik(y, lo, hi, s.exp()),
        (scale * 1e-3).ln(),
        (scale * 1e3).ln(),
        1e-10,
    );
    half_normal_loglik(y, lo, hi, ln_sigma.exp())
}

/// Fits `f(x) ~ exp(-b_+ x)` for `x > 0` and `exp(-b_- |x|)` for `x < 0`,
/// each by maximum likelihood on `lo <= |x| <= hi`.
pub fn fit_laplace(rates: &[f64], window: (f64, f64)) -> Result<LaplaceFit> {
    let (lo, hi) = window;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Config(format!("bad window [{lo}, {hi}]")));
    }
    let inside = |x: &f64| x.abs() >= lo && x.abs() <= hi;
    let plus: Vec<f64> = rates.iter().filter(|x| **x > 0.0 && inside(x)).copied().collect();
    let minus: Vec<f64> = rates.iter().filter(|x| **x < 0.0 && inside(x)).map(|x| -x).collect();
    if plus.len() < 2 || minus.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} positive and {} negative rates in the window",
            plus.len(),
            minus.len()
        )));
    }
    let b_plus = truncated_exponential_rate(&plus, lo, hi);
    let b_minus = truncated_exponential_rate(&minus, lo, hi);
    let n = (plus.len() + minus.len()) as f64;
    let side_weights = plus.len() as f64 * (plus.len() as f64 / n).ln() + minus.len() as f64 * (minus.len() as f64 / n).ln();
    let loglik_laplace =
        side_weights + exponential_loglik(&plus, lo, hi, b_plus) + exponential_loglik(&minus, lo, hi, b_minus);
    let loglik_gaussian = side_weights + best_half_normal(&plus, lo, hi) + best_half_normal(&minus, lo, hi);
    Ok(LaplaceFit {
        b_plus,
        b_minus,
        n_plus: plus.len(),
        n_minus: minus.len(),
        window,
        loglik_laplace,
        loglik_gaussian,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSizeFit {
    /// `sigma(s) ~ s^-beta`.
    pub beta: f64,
    pub beta_se: f64,
    pub p_value: f64,
    /// `(mean ln s, sigma, count)` per populated bin.
    pub bins: Vec<(f64, f64, usize)>,
}

/// Standard deviation of growth rates in base-1.1 log bins of size, and
/// the slope of `ln sigma` against `ln s`. Bins with fewer than
/// `min_per_bin` samples are ignored.
pub fn variance_size_scaling(samples: &[GrowthSample], min_per_bin: usize) -> Result<VarianceSizeFit> {
    let mut bins: HashMap<i64, (f64, f64, f64, usize)> = HashMap::new();
    for s in samples.iter().filter(|s| s.size > 0.0 && s.rate.is_finite()) {
        let b = (s.size.ln() / 1.1f64.ln()).floor() as i64;
        let e = bins.entry(b).or_default();
        e.0 += s.size.ln();
        e.1 += s.rate;
        e.2 += s.rate * s.rate;
        e.3 += 1;
    }
    let mut keys: Vec<i64> = bins.keys().copied().collect();
    keys.sort_unstable();
    let mut table = Vec::new();
    for k in keys {
        let (ls, r, r2, c) = bins[&k];
        if c < min_per_bin.max(2) {
            continue;
        }
        let cf = c as f64;
        let var = (r2 - r * r / cf) / (cf - 1.0);
        if var > 0.0 {
            table.push((ls / cf, var.sqrt(), c));
        }
    }
    if table.len() < 5 {
        return Err(Error::InsufficientData(format!("{} populated size bins, need 5", table.len())));
    }
    let x: Vec<f64> = table.iter().map(|b| b.0).collect();
    let y: Vec<f64> = table.iter().map(|b| b.1.ln()).collect();
    let fit = ols(&x, &y)?;
    Ok(VarianceSizeFit {
        beta: -fit.slope,
        beta_se: fit.slope_se,
        p_value: fit.p_value,
        bins: table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibratFit {
    pub gamma: f64,
    pub gamma_se: f64,
    pub intercept: f64,
    /// Two-sided p-value of `gamma = 1`.
    pub p_value_unit: f64,
    pub n: usize,
}

/// Regresses `ln(s_t / mean_t)` on `ln(s_{t-step} / mean_{t-step})`. Means are over all firms present in a snapshot.
pub fn gibrat_regression(histories: &[FirmHistory], step: usize) -> Result<GibratFit> {
    let step = step.max(1);
    let n_snap = histories.iter().map(|h| h.first + h.sizes.len()).max().unwrap_or(0);
    let mut sum = vec![0.0; n_snap];
    let mut count = vec![0usize; n_snap];
    for h in histories {
        for (i, &s) in h.sizes.iter().enumerate() {
            sum[h.first + i] += s;
            count[h.first + i] += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for h in histories {
        for i in step..h.sizes.len() {
            let (a, b) = (h.sizes[i - step], h.sizes[i]);
            let (ma, mb) = (mean[h.first + i - step], mean[h.first + i]);
            if a > 0.0 && b > 0.0 && ma > 0.0 && mb > 0.0 {
                x.push((a / ma).ln());
                y.push((b / mb).ln());
            }
        }
    }
    let fit = ols(&x, &y)?;
    Ok(GibratFit {
        gamma: fit.slope,
        gamma_se: fit.slope_se,
        intercept: fit.intercept,
        p_value_unit: t_p_value((fit.slope - 1.0) / fit.slope_se, fit.n as f64 - 2.0),
        n: fit.n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn hist(key: usize, sizes: Vec<f64>) -> FirmHistory {
        FirmHistory {
            key: (key, 0),
            first: 0,
            sizes,
        }
    }

    #[test]
    fn constant_and_doubling_sales() {
        let h = [hist(1, vec![2.0; 5]), hist(2, vec![1.0, 2.0, 4.0, 8.0])];
        let r = growth_rate_series(&h, 1, 30);
        assert_eq!(r.len(), 7);
        assert!(r[..4].iter().all(|s| s.rate == 0.0));
        assert!(r[4..].iter().all(|s| (s.rate - 2f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn three_firm_panel_brute_force() {
        let h = [
            hist(1, vec![1.0, 2.0, 0.0, 3.0, 6.0]),
            hist(2, vec![5.0, 4.0, 3.0]),
            FirmHistory {
                key: (3, 7),
                first: 2,
                sizes: vec![1.0, 1.5, 3.0, 3.0],
            },
        ];
        let got: Vec<(f64, f64)> = growth_rate_series(&h, 1, 2).iter().map(|s| (s.size, s.rate)).collect();
        let expect = vec![
            (1.0, 2f64.ln()),
            (3.0, 2f64.ln()),
            (5.0, 0.8f64.ln()),
            (4.0, 0.75f64.ln()),
            (1.5, 2f64.ln()),
            (3.0, 0.0),
        ];
        assert_eq!(got.len(), expect.len());
        for (g, e) in got.iter().zip(&expect) {
            assert!((g.0 - e.0).abs() < 1e-15 && (g.1 - e.1).abs() < 1e-15, "{g:?} vs {e:?}");
        }
    }

    #[test]
    fn histories_follow_keys() {
        let snaps = vec![
            vec![((1, 0), 1.0), ((2, 0), 2.0)],
            vec![((1, 0), 1.5)],
            vec![((1, 0), 2.0), ((2, 0), 3.0), ((3, 2), 1.0)],
        ];
        let h = histories_from_snapshots(&snaps);
        assert_eq!(h.len(), 4);
        assert_eq!(h[0].sizes, vec![1.0, 1.5, 2.0]);
        assert_eq!((h[1].first, h[1].sizes.len()), (0, 1));
        assert_eq!((h[2].key, h[2].first), ((2, 0), 2));
    }

    fn two_sided(n: usize, b_plus: f64, b_minus: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ep = Exp::new(b_plus).unwrap();
        let em = Exp::new(b_minus).unwrap();
        (0..n)
            .map(|_| if rng.random::<bool>() { ep.sample(&mut rng) } else { -em.sample(&mut rng) })
            .collect()
    }

    #[test]
    fn laplace_recovers_rate() {
        let x = two_sided(100_000, 10.0, 10.0, 1);
        let f = fit_laplace(&x, (0.05, 0.5)).unwrap();
        assert!((f.b_plus - 10.0).abs() < 0.5, "{f:?}");
        assert!((f.b_minus - 10.0).abs() < 0.5, "{f:?}");
        assert!(f.laplace_preferred());
    }

    #[test]
    fn laplace_untruncated_is_inverse_mean() {
        let x = two_sided(10_000, 4.0, 7.0, 2);
        let f = fit_laplace(&x, (0.0, f64::INFINITY)).unwrap();
        let pos: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
        let mean = pos.iter().sum::<f64>() / pos.len() as f64;
        assert!((f.b_plus - 1.0 / mean).abs() < 1e-9);
    }

    #[test]
    fn laplace_truncated_matches_direct_likelihood_maximum() {
        let x = two_sided(20_000, 6.0, 9.0, 3);
        let (lo, hi) = (0.05, 0.5);
        let f = fit_laplace(&x, (lo, hi)).unwrap();
        let plus: Vec<f64> = x.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
        let nll = |b: f64| {
            let z: f64 = ((-b * lo).exp() - (-b * hi).exp()) / b;
            -(plus.iter().map(|y| -b * y).sum::<f64>() - plus.len() as f64 * z.ln())
        };
        let b = golden_section(nll, 0.1, 100.0, 1e-12);
        assert!((f.b_plus - b).abs() < 1e-6 * b, "{} vs {b}", f.b_plus);
    }

    #[test]
    fn gaussian_rates_prefer_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..50_000).map(|_| 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
        let f = fit_laplace(&x, (0.05, 0.5)).unwrap();
        assert!(!f.laplace_preferred(), "{f:?}");
        let sym = fit_laplace(&two_sided(50_000, 8.0, 8.0, 6), (0.05, 0.5)).unwrap();
        assert!((sym.b_plus - sym.b_minus).abs() < 0.5);
    }

    #[test]
    fn laplace_needs_data() {
        assert!(fit_laplace(&[0.01, 0.02, 0.9], (0.05, 0.5)).is_err());
    }

    fn panel(beta: f64, seed: u64) -> Vec<GrowthSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..200_000)
            .map(|_| {
                let size = 10f64.powf(rng.random_range(0.0..4.0));
                let z: f64 = rng.sample(StandardNormal);
                GrowthSample {
                    size,
                    rate: 0.3 * size.powf(-beta) * z,
                }
            })
            .collect()
    }

    #[test]
    fn variance_size_slope() {
        let f = variance_size_scaling(&panel(0.075, 1), 30).unwrap();
        assert!((f.beta - 0.075).abs() < 0.01, "{}", f.beta);
        assert!(f.p_value < 1e-3);
        let flat = variance_size_scaling(&panel(0.0, 2), 30).unwrap();
        assert!(flat.beta.abs() < 0.01, "{}", flat.beta);
    }

    #[test]
    fn gibrat_persistent_and_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let same: Vec<FirmHistory> = (0..50).map(|i| hist(i, vec![rng.random_range(1.0..100.0); 4])).collect();
        let g = gibrat_regression(&same, 1).unwrap();
        assert!((g.gamma - 1.0).abs() < 1e-12);
        let iid: Vec<FirmHistory> = (0..2000)
            .map(|i| hist(i, (0..5).map(|_| rng.random_range(1.0..100.0)).collect()))
            .collect();
        let g = gibrat_regression(&iid, 1).unwrap();
        assert!(g.gamma.abs() < 0.05, "{g:?}");
        assert!(g.p_value_unit < 1e-3);
    }

    #[test]
    fn gibrat_degenerate_regressor() {
        let h = [hist(1, vec![1.0, 2.0]), hist(2, vec![1.0, 3.0])];
        assert!(gibrat_regression(&h, 1).is_err());
    }
}
