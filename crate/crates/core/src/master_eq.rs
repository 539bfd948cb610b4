//! Degree-class kinetics of link swaps: gain and loss rates, the
//! stationary in-degree distribution, and a reduced Monte-Carlo model that
//! only tracks links.
//!
//! Firms with more clients are taken to be more competitive. With
//! `T_k = 1 - F_k`, a class-`k` firm is cheaper than a fraction
//! `phi_k = T_k + P_k / 2` of firms (ties split evenly) and dearer than
//! `psi_k = 1 - phi_k`. The stationary distribution balances the flow from
//! class `k` to `k + 1` against the flow back: `rho_k = mu_{k+1}`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::stream_rng;

const NEWTON_TOLERANCE: f64 = 1e-13;
const MAX_NEWTON_STEPS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    /// Probability of each degree class `0..=k_max`.
    pub p: Vec<f64>,
    /// Cumulative `F_k`.
    pub cdf: Vec<f64>,
    /// Share of firms dearer than a class-`k` firm.
    pub psi: Vec<f64>,
    /// Share of firms cheaper than a class-`k` firm.
    pub phi: Vec<f64>,
    /// Mean number of links per firm.
    pub d_tilde: f64,
    /// Number of firms, for empirical distributions.
    pub m: Option<usize>,
}

impl DegreeDistribution {
    /// Builds the distribution with the competitiveness closures.
    pub fn with_closures(p: Vec<f64>, d_tilde: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InsufficientData("empty degree distribution".into()));
        }
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config("degree probabilities must be nonnegative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("degree probabilities sum to {total}")));
        }
        let mut cdf = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        for &x in &p {
            acc += x;
            cdf.push(acc.min(1.0));
        }
        let phi: Vec<f64> = p
            .iter()
            .zip(&cdf)
            .map(|(&pk, &f)| ((1.0 - f) + pk / 2.0).clamp(0.0, 1.0))
            .collect();
        let psi = phi.iter().map(|x| 1.0 - x).collect();
        Ok(Self {
            p,
            cdf,
            psi,
            phi,
            d_tilde,
            m: None,
        })
    }

    /// Empirical distribution of `degrees`; `d_tilde` is their mean.
    pub fn from_degrees(degrees: &[usize]) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InsufficientData("no degrees".into()));
        }
        let k_max = *degrees.iter().max().unwrap();
        let mut counts = vec![0usize; k_max + 1];
        for &k in degrees {
            counts[k] += 1;
        }
        let n = degrees.len() as f64;
        let p = counts.iter().map(|&c| c as f64 / n).collect();
        let mean = degrees.iter().sum::<usize>() as f64 / n;
        let mut d = Self::with_closures(p, mean)?;
        d.m = Some(degrees.len());
        Ok(d)
    }

    pub fn k_max(&self) -> usize {
        self.p.len() - 1
    }

    /// `1 - F_k`, zero beyond the support.
    pub fn tail(&self, k: usize) -> f64 {
        self.cdf.get(k).map_or(0.0, |f| (1.0 - f).max(0.0))
    }

    pub fn cdf_at(&self, k: usize) -> f64 {
        self.cdf.get(k).copied().unwrap_or(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// Largest gap between the two cumulative distributions.
    pub fn ks_distance(&self, other: &Self) -> f64 {
        let n = self.p.len().max(other.p.len());
        (0..n)
            .map(|k| (self.cdf_at(k) - other.cdf_at(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest per-class imbalance `|rho_k - mu_{k+1}|`.
    pub fn balance_residual(&self) -> f64 {
        (0..self.k_max())
            .map(|k| (gain_rate(k, self) - loss_rate(k + 1, self).unwrap_or(f64::NAN)).abs())
            .fold(0.0, f64::max)
    }
}

/// Probability that a class-`k` firm wins a link in one swap attempt:
/// it is drawn as challenger (`P_k`) and the incumbent is dearer (`psi_k`).
pub fn gain_rate(k: usize, dist: &DegreeDistribution) -> f64 {
    match (dist.p.get(k), dist.psi.get(k)) {
        (Some(p), Some(psi)) => p * psi,
        _ => 0.0,
    }
}

/// Probability that a class-`k` firm loses a link in one swap attempt:
/// one of its links is drawn (`k P_k / d_tilde`) and the challenger is
/// cheaper (`phi_k`).
pub fn loss_rate(k: usize, dist: &DegreeDistribution) -> Result<f64> {
    if !(dist.d_tilde > 0.0) {
        return Err(Error::Domain {
            name: "d_tilde",
            value: dist.d_tilde,
            range: "(0, inf)",
        });
    }
    Ok(match (dist.p.get(k), dist.phi.get(k)) {
        (Some(p), Some(phi)) => k as f64 / dist.d_tilde * p * phi,
        _ => 0.0,
    })
}

/// `mu_k / rho_k`.
pub fn flow_ratio(k: usize, dist: &DegreeDistribution) -> Result<f64> {
    let rho = gain_rate(k, dist);
    if rho == 0.0 {
        return Err(Error::UndefinedRatio(format!("gain rate of class {k} is zero")));
    }
    Ok(loss_rate(k, dist)? / rho)
}

/// Balance residuals in terms of tails `t[k] = T_k`, with `T_{-1} = 1` and
/// `T_K = 0`.
fn residuals(t: &[f64], d: f64, out: &mut [f64]) {
    let k_max = t.len();
    for k in 0..k_max {
        let prev = if k == 0 { 1.0 } else { t[k - 1] };
        let next = if k + 1 < k_max { t[k + 1] } else { 0.0 };
        let tk = t[k];
        out[k] = d * (prev - tk) * (1.0 - (tk + prev) / 2.0) - (k + 1) as f64 * (tk * tk - next * next) / 2.0;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn feasible(t: &[f64]) -> bool {
    let mut prev = 1.0;
    for &x in t {
        if !(x > 0.0 && x < prev) {
            return false;
        }
        prev = x;
    }
    true
}

/// Solves `a_k x_{k-1} + b_k x_k + c_k x_{k+1} = r_k` in place (`r` becomes `x`).
fn thomas(a: &[f64], b: &mut [f64], c: &[f64], r: &mut [f64]) {
    let n = b.len();
    for k in 1..n {
        let w = a[k] / b[k - 1];
        b[k] -= w * c[k - 1];
        r[k] -= w * r[k - 1];
    }
    r[n - 1] /= b[n - 1];
    for k in (0..n - 1).rev() {
        r[k] = (r[k] - c[k] * r[k + 1]) / b[k];
    }
}

/// Stationary in-degree distribution on classes `0..=k_max`.
///
/// The balance equations are solved for the tails by Newton's method with a
/// tridiagonal Jacobian; mass beyond `k_max` sits in the last class.
pub fn stationary_degree_distribution(d_tilde: f64, k_max: usize) -> Result<DegreeDistribution> {
    if !(d_tilde.is_finite() && d_tilde >= 1.0) {
        return Err(Error::Domain {
            name: "d_tilde",
            value: d_tilde,
            range: "[1, inf)",
        });
    }
    if (k_max as f64) < 2.0 * d_tilde {
        return Err(Error::Config(format!("k_max = {k_max} must be at least 2 d_tilde")));
    }
    let d = d_tilde;
    let n = k_max;
    let mut t: Vec<f64> = (0..n).map(|k| (d / (k as f64 + 2.0)).min(0.99)).collect();
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_r = vec![0.0; n];
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    residuals(&t, d, &mut r);
    let mut res = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut steps = 0;
    while res > NEWTON_TOLERANCE {
        if steps == MAX_NEWTON_STEPS {
            return Err(Error::NonConvergence {
                what: "stationary degree distribution",
                iterations: steps,
                residual: res,
            });
        }
        steps += 1;
        for k in 0..n {
            let prev = if k == 0 { 1.0 } else { t[k - 1] };
            let next = if k + 1 < n { t[k + 1] } else { 0.0 };
            a[k] = d * (1.0 - prev);
            b[k] = d * (t[k] - 1.0) - (k + 1) as f64 * t[k];
            c[k] = (k + 1) as f64 * next;
        }
        let mut delta: Vec<f64> = r.iter().map(|x| -x).collect();
        thomas(&a, &mut b, &c, &mut delta);
        let base = norm(&r);
        let mut step = 1.0;
        loop {
            for k in 0..n {
                trial[k] = t[k] + step * delta[k];
            }
            if feasible(&trial) {
                residuals(&trial, d, &mut trial_r);
                if norm(&trial_r) < base || step < 1e-12 {
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(Error::NonConvergence {
                    what: "stationary degree distribution (line search)",
                    iterations: steps,
                    residual: res,
                });
            }
        }
        std::mem::swap(&mut t, &mut trial);
        std::mem::swap(&mut r, &mut trial_r);
        res = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }

    let mut p = Vec::with_capacity(n + 1);
    let mut prev = 1.0;
    for &x in &t {
        p.push(prev - x);
        prev = x;
    }
    p.push(prev);
    DegreeDistribution::with_closures(p, d_tilde)
}

/// Least-squares slope of `ln(1 - F_k)` against `ln k` over `k_lo..=k_hi`.
pub fn tail_log_slope(dist: &DegreeDistribution, k_lo: usize, k_hi: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = (k_lo.max(1)..=k_hi)
        .filter(|&k| dist.tail(k) > 0.0)
        .map(|k| ((k as f64).ln(), dist.tail(k).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!("{} tail points", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Competitiveness order of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Competitiveness {
    /// Each firm draws a uniform cost score; a re-entering firm draws anew.
    #[default]
    RandomScore,
    /// More clients win; ties go to the lower id.
    InDegree,
    /// Nobody outranks anybody.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedSwapOptions {
    pub steps: u64,
    pub seed: u64,
    pub competitiveness: Competitiveness,
    /// A firm left without clients re-enters at once, winning each other
    /// firm as a client with probability `d_tilde / m`.
    pub reentry: bool,
}

impl Default for ReducedSwapOptions {
    fn default() -> Self {
        Self {
            steps: 10_000_000,
            seed: 0,
            competitiveness: Competitiveness::RandomScore,
            reentry: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSwapResult {
    pub distribution: DegreeDistribution,
    pub in_degrees: Vec<usize>,
    pub accepted_swaps: u64,
    pub reentries: u64,
    pub total_links: usize,
}

struct LinkTable {
    start: Vec<usize>,
    buyer: Vec<usize>,
    supplier: Vec<usize>,
    in_degree: Vec<usize>,
}

impl LinkTable {
    fn buys_from(&self, b: usize, s: usize) -> bool {
        self.supplier[self.start[b]..self.start[b + 1]].contains(&s)
    }

    fn repoint(&mut self, link: usize, to: usize) -> usize {
        let old = std::mem::replace(&mut self.supplier[link], to);
        self.in_degree[old] -= 1;
        self.in_degree[to] += 1;
        old
    }
}

/// Degree-only abstraction of rewiring: each step draws one link and one
/// challenger firm uniformly; the challenger takes the link if it outranks
/// the current supplier and is not already a supplier of that buyer.
/// Returns the final in-degree histogram.
pub fn reduced_swap_simulation(m: usize, out_degrees: &[usize], options: &ReducedSwapOptions) -> Result<ReducedSwapResult> {
    if m < 100 {
        return Err(Error::Config(format!("reduced simulation needs m >= 100, got {m}")));
    }
    if out_degrees.len() != m {
        return Err(Error::Config(format!("expected {m} out-degrees, got {}", out_degrees.len())));
    }
    if let Some(&k) = out_degrees.iter().find(|&&k| k == 0 || k >= m) {
        return Err(Error::Config(format!("out-degree {k} outside [1, {}]", m - 1)));
    }
    let mut rng = stream_rng(options.seed, 0);
    let mut start = Vec::with_capacity(m + 1);
    start.push(0);
    for &k in out_degrees {
        start.push(start.last().unwrap() + k);
    }
    let links = start[m];
    let mut table = LinkTable {
        buyer: vec![0; links],
        supplier: vec![0; links],
        in_degree: vec![0; m],
        start,
    };
    for b in 0..m {
        let chosen = index::sample(&mut rng, m - 1, out_degrees[b]);
        for (q, x) in chosen.into_iter().enumerate() {
            let s = if x >= b { x + 1 } else { x };
            let l = table.start[b] + q;
            table.buyer[l] = b;
            table.supplier[l] = s;
            table.in_degree[s] += 1;
        }
    }
    let mut score: Vec<f64> = match options.competitiveness {
        Competitiveness::RandomScore => (0..m).map(|_| rng.random()).collect(),
        _ => vec![0.0; m],
    };
    let d_tilde = links as f64 / m as f64;
    let client_p = d_tilde / m as f64;

    let mut accepted = 0u64;
    let mut reentries = 0u64;
    let mut queue: Vec<usize> = Vec::new();
    for _ in 0..options.steps {
        let l = rng.random_range(0..links);
        let c = rng.random_range(0..m);
        let j = table.supplier[l];
        let b = table.buyer[l];
        if c == j || c == b || table.buys_from(b, c) {
            continue;
        }
        let wins = match options.competitiveness {
            Competitiveness::RandomScore => score[c] < score[j],
            Competitiveness::InDegree => {
                let (dc, dj) = (table.in_degree[c], table.in_degree[j]);
                dc > dj || (dc == dj && c < j)
            }
            Competitiveness::Equal => false,
        };
        if !wins {
            continue;
        }
        table.repoint(l, c);
        accepted += 1;
        if options.reentry && table.in_degree[j] == 0 {
            queue.push(j);
            while let Some(z) = queue.pop() {
                if table.in_degree[z] > 0 {
                    continue;
                }
                reentries += 1;
                if options.competitiveness == Competitiveness::RandomScore {
                    score[z] = rng.random();
                }
                while table.in_degree[z] == 0 {
                    for f in 0..m {
                        if f == z || rng.random::<f64>() >= client_p || table.buys_from(f, z) {
                            continue;
                        }
                        let pos = table.start[f] + rng.random_range(0..out_degrees[f]);
                        let old = table.repoint(pos, z);
                        if table.in_degree[old] == 0 {
                            queue.push(old);
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(table.in_degree.iter().sum::<usize>(), links);
    let distribution = DegreeDistribution::from_degrees(&table.in_degree)?;
    Ok(ReducedSwapResult {
        distribution,
        in_degrees: table.in_degree,
        accepted_swaps: accepted,
        reentries,
        total_links: links,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn toy(p: Vec<f64>, psi: Vec<f64>, phi: Vec<f64>, d_tilde: f64) -> DegreeDistribution {
        let mut acc = 0.0;
        let cdf = p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        DegreeDistribution {
            p,
            cdf,
            psi,
            phi,
            d_tilde,
            m: None,
        }
    }

    #[test]
    fn rate_examples() {
        let d = toy(vec![0.0, 0.25, 0.25, 0.25, 0.25], vec![1.0; 5], vec![0.0; 5], 2.5);
        for k in 1..=4 {
            assert_eq!(gain_rate(k, &d), 0.25);
            assert_eq!(loss_rate(k, &d).unwrap(), 0.0);
        }
        assert_eq!(gain_rate(0, &d), 0.0);
        let zero_psi = toy(vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0], 1.0);
        assert_eq!(gain_rate(1, &zero_psi), 0.0);
        assert!(matches!(flow_ratio(1, &zero_psi), Err(Error::UndefinedRatio(_))));

        let mut p = vec![0.0; 6];
        p[5] = 0.1;
        p[0] = 0.9;
        let d = toy(p, vec![0.5; 6], vec![1.0; 6], 5.0);
        assert!((loss_rate(5, &d).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(loss_rate(0, &d).unwrap(), 0.0);
        assert!((flow_ratio(5, &d).unwrap() - 0.1 / 0.05).abs() < 1e-15);

        let bad = toy(vec![1.0], vec![1.0], vec![0.0], 0.0);
        assert!(loss_rate(0, &bad).is_err());
    }

    #[test]
    fn closures_split_ties() {
        let d = DegreeDistribution::with_closures(vec![0.2, 0.5, 0.3], 1.1).unwrap();
        // cheaper than class 1: everyone in class 2 plus half of class 1
        assert!((d.phi[1] - 0.55).abs() < 1e-15);
        assert!((d.psi[1] - 0.45).abs() < 1e-15);
        assert!((d.phi[2] - 0.15).abs() < 1e-15);
        assert!((d.psi[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn solver_balances_every_class() {
        let d = stationary_degree_distribution(5.0, 500).unwrap();
        let total: f64 = d.p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(d.p.iter().all(|&x| x >= 0.0));
        assert!(d.balance_residual() <= 1e-10, "{}", d.balance_residual());
        assert!(d.cdf.windows(2).all(|w| w[1] >= w[0]));
        assert!(d.psi.iter().chain(&d.phi).all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn solver_matches_independent_root_finder() {
        // Reference values from a hybrid Powell solve of the same system.
        let d = stationary_degree_distribution(5.0, 500).unwrap();
        assert!((d.p[0] - 0.173).abs() < 5e-4, "{}", d.p[0]);
        for (k, expect) in [(50, 0.93), (100, 0.965), (200, 0.983), (300, 0.988)] {
            let got = k as f64 * d.tail(k) / 5.0;
            assert!((got - expect).abs() < 5e-3, "k = {k}: {got}");
        }
    }

    #[test]
    fn zipf_tail() {
        let d = stationary_degree_distribution(5.0, 500).unwrap();
        for k in 50..=300 {
            let x = k as f64 * d.tail(k) / 5.0;
            assert!((0.9..=1.1).contains(&x), "k = {k}: {x}");
        }
        let slope = tail_log_slope(&d, 50, 300).unwrap();
        assert!((slope + 1.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn other_mean_degrees_converge() {
        for (d_tilde, k_max) in [(1.0, 100), (2.5, 250), (10.0, 1000)] {
            let d = stationary_degree_distribution(d_tilde, k_max).unwrap();
            assert!(d.balance_residual() <= 1e-10);
        }
    }

    #[test]
    fn solver_rejects_bad_inputs() {
        assert!(stationary_degree_distribution(0.5, 100).is_err());
        assert!(stationary_degree_distribution(5.0, 8).is_err());
    }

    fn poisson_degrees(m: usize, mean: f64, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = Poisson::new(mean).unwrap();
        (0..m).map(|_| (law.sample(&mut rng) as usize).max(1)).collect()
    }

    #[test]
    fn equal_rank_never_swaps() {
        let out = poisson_degrees(200, 4.0, 1);
        let opts = ReducedSwapOptions {
            steps: 100_000,
            seed: 3,
            competitiveness: Competitiveness::Equal,
            reentry: true,
        };
        let a = reduced_swap_simulation(200, &out, &opts).unwrap();
        let b = reduced_swap_simulation(
            200,
            &out,
            &ReducedSwapOptions {
                steps: 0,
                ..opts.clone()
            },
        )
        .unwrap();
        assert_eq!(a.accepted_swaps, 0);
        assert_eq!(a.in_degrees, b.in_degrees);
    }

    #[test]
    fn swaps_conserve_links_and_are_deterministic() {
        let out = poisson_degrees(300, 5.0, 2);
        let links: usize = out.iter().sum();
        for competitiveness in [Competitiveness::RandomScore, Competitiveness::InDegree] {
            let opts = ReducedSwapOptions {
                steps: 200_000,
                seed: 11,
                competitiveness,
                reentry: competitiveness == Competitiveness::RandomScore,
            };
            let a = reduced_swap_simulation(300, &out, &opts).unwrap();
            assert_eq!(a.in_degrees.iter().sum::<usize>(), links);
            assert_eq!(a.total_links, links);
            assert!(a.accepted_swaps > 0);
            let b = reduced_swap_simulation(300, &out, &opts).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reentry_keeps_every_firm_supplied_with_clients() {
        let out = poisson_degrees(300, 5.0, 2);
        let opts = ReducedSwapOptions {
            steps: 300_000,
            seed: 5,
            ..Default::default()
        };
        let r = reduced_swap_simulation(300, &out, &opts).unwrap();
        assert!(r.reentries > 0);
        assert!(r.in_degrees.iter().all(|&k| k > 0));
    }

    #[test]
    fn ks_distance_of_identical_is_zero() {
        let d = DegreeDistribution::from_degrees(&[1, 2, 2, 3, 7]).unwrap();
        assert_eq!(d.ks_distance(&d), 0.0);
        let e = DegreeDistribution::from_degrees(&[1, 1, 1, 1, 1]).unwrap();
        assert!((d.ks_distance(&e) - 0.8).abs() < 1e-15);
        assert!((d.mean() - 3.0).abs() < 1e-15);
        assert_eq!(d.m, Some(5));
    }
}
