//! CES production primitive, its cost-minimizing input shares and the dual
//! price index.
//!
//! A firm combining labor `x_0` with intermediates `x_1..x_n` produces
//!
//! ```text
//! f = x_0^alpha * (sum_j x_j^theta)^((1 - alpha) / theta)
//! ```
//!
//! with `theta = 0` read as the Cobb-Douglas limit
//! `x_0^alpha * prod_j x_j^((1 - alpha) / n)`.

use crate::error::{check_open, check_range, Error, Result};

/// Validated `(alpha, theta)` pair used on the hot path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Technology {
    pub alpha: f64,
    pub theta: f64,
}

impl Technology {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        check_open("alpha", alpha, "(0, 1)")?;
        check_range("theta", theta, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { alpha, theta })
    }

    /// Output from labor and intermediate quantities. Inputs are not checked.
    #[inline]
    pub fn output<I>(&self, labor: f64, inputs: I) -> f64
    where
        I: IntoIterator<Item = f64>,
    {
        if labor <= 0.0 {
            return 0.0;
        }
        let alpha = self.alpha;
        let theta = self.theta;
        let aggregate = if theta == 0.0 {
            let mut n = 0usize;
            let mut log_sum = 0.0;
            for x in inputs {
                if x <= 0.0 {
                    return 0.0;
                }
                n += 1;
                log_sum += x.ln();
            }
            if n == 0 {
                return 0.0;
            }
            ((1.0 - alpha) * log_sum / n as f64).exp()
        } else {
            let s: f64 = if theta == 0.5 {
                inputs.into_iter().map(|x| x.max(0.0).sqrt()).sum()
            } else if theta == 1.0 {
                inputs.into_iter().map(|x| x.max(0.0)).sum()
            } else {
                inputs.into_iter().map(|x| x.max(0.0).powf(theta)).sum()
            };
            if s <= 0.0 {
                return 0.0;
            }
            s.powf((1.0 - alpha) / theta)
        };
        labor.powf(alpha) * aggregate
    }
}

/// Checked CES output.
pub fn ces_output(labor: f64, inputs: &[f64], alpha: f64, theta: f64) -> Result<f64> {
    let tech = Technology::new(alpha, theta)?;
    if !(labor.is_finite() && labor >= 0.0) {
        return Err(Error::Domain {
            name: "labor",
            value: labor,
            range: "[0, inf)",
        });
    }
    if inputs.is_empty() {
        return Err(Error::Config("at least one intermediate input is required".into()));
    }
    if let Some(&bad) = inputs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain {
            name: "input quantity",
            value: bad,
            range: "[0, inf)",
        });
    }
    Ok(tech.output(labor, inputs.iter().copied()))
}

/// Cost-minimizing spending shares: labor gets exactly `alpha`, the
/// intermediate block `1 - alpha` split according to relative prices.
#[derive(Debug, Clone, PartialEq)]
pub struct InputShares {
    pub labor: f64,
    pub inputs: Vec<f64>,
}

/// Optimal shares for a firm facing `supplier_prices`.
///
/// `alpha` may be zero here (pure intermediate technology), which is useful
/// for isolating the intermediate split.
pub fn optimal_input_shares(supplier_prices: &[f64], alpha: f64, theta: f64) -> Result<InputShares> {
    check_range("alpha", alpha, 0.0, 1.0 - f64::EPSILON, "[0, 1)")?;
    check_range("theta", theta, 0.0, 1.0, "[0, 1]")?;
    if supplier_prices.is_empty() {
        return Err(Error::Config("supplier set is empty".into()));
    }
    if let Some(&bad) = supplier_prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::Domain {
            name: "price",
            value: bad,
            range: "(0, inf)",
        });
    }
    let mut inputs = vec![0.0; supplier_prices.len()];
    intermediate_split(supplier_prices, 1.0 - alpha, theta, &mut inputs);
    Ok(InputShares {
        labor: alpha,
        inputs,
    })
}

/// Writes the optimal intermediate shares (summing to `budget`) into `out`.
/// Prices must be positive; no checks.
#[inline]
pub(crate) fn intermediate_split(prices: &[f64], budget: f64, theta: f64, out: &mut [f64]) {
    debug_assert_eq!(prices.len(), out.len());
    let n = prices.len();
    if theta == 0.0 {
        out.iter_mut().for_each(|s| *s = budget / n as f64);
        return;
    }
    let (argmin, pmin) = prices
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, p)| if p < acc.1 { (k, p) } else { acc });
    if theta == 1.0 {
        out.iter_mut().for_each(|s| *s = 0.0);
        out[argmin] = budget;
        return;
    }
    let exponent = -theta / (1.0 - theta);
    let mut total = 0.0;
    for (s, &p) in out.iter_mut().zip(prices) {
        let ratio = p / pmin;
        *s = if exponent == -1.0 {
            1.0 / ratio
        } else {
            ratio.powf(exponent)
        };
        total += *s;
    }
    let scale = budget / total;
    out.iter_mut().for_each(|s| *s *= scale);
}

/// Same as [`intermediate_split`] for `0 < theta < 1`, from log prices.
pub(crate) fn intermediate_split_log(log_prices: &[f64], budget: f64, theta: f64, out: &mut [f64]) {
    let exponent = -theta / (1.0 - theta);
    let lmin = log_prices.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (s, &l) in out.iter_mut().zip(log_prices) {
        *s = (exponent * (l - lmin)).exp();
        total += *s;
    }
    let scale = budget / total;
    out.iter_mut().for_each(|s| *s *= scale);
}

/// Unit cost of the intermediate aggregate `(sum_j x_j^theta)^(1/theta)`.
///
/// For `theta = 0` this returns the geometric mean of the prices, and for
/// `theta = 1` the minimum price.
pub fn ces_price_index(prices: &[f64], theta: f64) -> Result<f64> {
    check_range("theta", theta, 0.0, 1.0, "[0, 1]")?;
    if prices.is_empty() {
        return Err(Error::Config("price list is empty".into()));
    }
    if let Some(&bad) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::Domain {
            name: "price",
            value: bad,
            range: "(0, inf)",
        });
    }
    Ok(price_index_unchecked(prices.iter().copied(), theta))
}

#[inline]
pub(crate) fn price_index_unchecked<I>(prices: I, theta: f64) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    if theta == 0.0 {
        let (n, log_sum) = prices
            .into_iter()
            .fold((0usize, 0.0), |(n, s), p| (n + 1, s + p.ln()));
        return (log_sum / n as f64).exp();
    }
    let pmin = prices.clone().into_iter().fold(f64::INFINITY, f64::min);
    if theta == 1.0 {
        return pmin;
    }
    let exponent = -theta / (1.0 - theta);
    let s: f64 = prices.into_iter().map(|p| (p / pmin).powf(exponent)).sum();
    pmin * s.powf(1.0 / exponent)
}

/// Minimal cost of producing one unit of output with wage `wage` and the
/// given supplier prices.
pub fn unit_cost(wage: f64, supplier_prices: &[f64], alpha: f64, theta: f64) -> Result<f64> {
    check_open("alpha", alpha, "(0, 1)")?;
    let index = ces_price_index(supplier_prices, theta)?;
    if !(wage.is_finite() && wage > 0.0) {
        return Err(Error::Domain {
            name: "wage",
            value: wage,
            range: "(0, inf)",
        });
    }
    Ok(unit_cost_unchecked(wage, index, supplier_prices.len(), alpha, theta))
}

/// Unit cost from a precomputed price index (see [`ces_price_index`]).
#[inline]
pub(crate) fn unit_cost_unchecked(wage: f64, index: f64, n: usize, alpha: f64, theta: f64) -> f64 {
    // The Cobb-Douglas aggregate prod x_j^(1/n) has unit cost n * geomean(p).
    let aggregate_cost = if theta == 0.0 { n as f64 * index } else { index };
    let kappa = alpha.powf(-alpha) * (1.0 - alpha).powf(alpha - 1.0);
    kappa * wage.powf(alpha) * aggregate_cost.powf(1.0 - alpha)
}
