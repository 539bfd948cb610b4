//! Exit counts per period and exit hazard by firm age.

use serde::{Deserialize, Serialize};

use super::{log_bin, ols};
use crate::error::{Error, Result};
use crate::events::ExitEvent;

/// Firm-periods observed at each age (in periods) over a window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgeCensus {
    pub counts: Vec<u64>,
}

impl AgeCensus {
    pub fn record(&mut self, age: u64) {
        let a = age as usize;
        if a >= self.counts.len() {
            self.counts.resize(a + 1, 0);
        }
        self.counts[a] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStatsOptions {
    pub bin_base: f64,
    /// Ages are divided by this before the tail fit.
    pub age_unit: f64,
    /// Smallest bin centre, in periods, used by the tail fit.
    pub tail_start: f64,
    /// Largest KS distance for which the geometric law counts as a good fit.
    pub ks_threshold: f64,
    pub min_tail_bins: usize,
}

impl Default for ExitStatsOptions {
    fn default() -> Self {
        Self {
            bin_base: 1.1,
            age_unit: 1.0,
            tail_start: 0.0,
            ks_threshold: 0.05,
            min_tail_bins: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBin {
    pub lo: f64,
    pub hi: f64,
    /// Mean age of the firm-periods in the bin.
    pub age: f64,
    pub exits: u64,
    pub exposure: u64,
    /// Exits per firm-period.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub periods: u64,
    pub total_exits: u64,
    /// `histogram[c]` = number of periods with `c` exits.
    pub histogram: Vec<u64>,
    pub mean_exits: f64,
    /// Decay rate `c` of `P(n) ~ exp(-c n)` from the geometric MLE.
    pub exponential_rate: Option<f64>,
    pub exponential_ks: Option<f64>,
    pub loglik_exponential: Option<f64>,
    pub loglik_poisson: Option<f64>,
    pub exponential_good: bool,
    pub age_bins: Vec<AgeBin>,
    /// `a` in `frequency ~ exp(-a age / age_unit)` beyond `tail_start`.
    pub tail_decay: Option<f64>,
    pub tail_decay_se: Option<f64>,
    pub tail_bins: usize,
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Exit statistics over periods `window.0 .. window.1`. Exits outside the
/// window are ignored; the census must cover the same window.
pub fn exit_statistics(
    exits: &[ExitEvent],
    census: &AgeCensus,
    window: (u64, u64),
    opts: &ExitStatsOptions,
) -> Result<ExitStats> {
    let (start, end) = window;
    if end <= start {
        return Err(Error::Config(format!("empty window [{start}, {end})")));
    }
    if !(opts.bin_base > 1.0 && opts.age_unit > 0.0) {
        return Err(Error::Config("bin base must exceed 1 and age unit be positive".into()));
    }
    let periods = end - start;
    let inside: Vec<&ExitEvent> = exits.iter().filter(|e| e.t >= start && e.t < end).collect();
    let mut per_period = vec![0u64; periods as usize];
    for e in &inside {
        per_period[(e.t - start) as usize] += 1;
    }
    let total_exits = inside.len() as u64;
    let max_count = per_period.iter().copied().max().unwrap_or(0) as usize;
    let mut histogram = vec![0u64; if total_exits == 0 { 0 } else { max_count + 1 }];
    if total_exits > 0 {
        for &c in &per_period {
            histogram[c as usize] += 1;
        }
    }
    let mean = total_exits as f64 / periods as f64;

    let mut stats = ExitStats {
        periods,
        total_exits,
        histogram,
        mean_exits: mean,
        exponential_rate: None,
        exponential_ks: None,
        loglik_exponential: None,
        loglik_poisson: None,
        exponential_good: false,
        age_bins: Vec::new(),
        tail_decay: None,
        tail_decay_se: None,
        tail_bins: 0,
    };
    if total_exits == 0 {
        return Ok(stats);
    }

    let q = mean / (1.0 + mean);
    stats.exponential_rate = Some(-q.ln());
    let n = periods as f64;
    let mut ks: f64 = 0.0;
    let mut cum = 0u64;
    let (mut ll_geo, mut ll_poi) = (0.0, 0.0);
    for (c, &h) in stats.histogram.iter().enumerate() {
        cum += h;
        let fit_cdf = 1.0 - q.powi(c as i32 + 1);
        ks = ks.max((cum as f64 / n - fit_cdf).abs());
        if h > 0 {
            let cf = c as f64;
            ll_geo += h as f64 * ((1.0 - q).ln() + cf * q.ln());
            ll_poi += h as f64 * (cf * mean.ln() - mean - ln_factorial(c as u64));
        }
    }
    stats.exponential_ks = Some(ks);
    stats.loglik_exponential = Some(ll_geo);
    stats.loglik_poisson = Some(ll_poi);
    stats.exponential_good = ks <= opts.ks_threshold && ll_geo >= ll_poi;

    let nbins = census.counts.len().max(inside.iter().map(|e| e.age as usize + 1).max().unwrap_or(0));
    let n_log = log_bin(nbins as f64, opts.bin_base) + 1;
    let mut exits_in = vec![0u64; n_log];
    let mut exposure = vec![0u64; n_log];
    let mut age_sum = vec![0.0; n_log];
    for e in &inside {
        exits_in[log_bin(e.age as f64, opts.bin_base)] += 1;
    }
    for (age, &c) in census.counts.iter().enumerate() {
        let b = log_bin(age as f64, opts.bin_base);
        exposure[b] += c;
        age_sum[b] += c as f64 * age as f64;
    }
    for b in 0..n_log {
        if exposure[b] == 0 && exits_in[b] == 0 {
            continue;
        }
        let lo = if b == 0 { 0.0 } else { opts.bin_base.powi(b as i32) };
        let hi = opts.bin_base.powi(b as i32 + 1);
        stats.age_bins.push(AgeBin {
            lo,
            hi,
            age: if exposure[b] > 0 { age_sum[b] / exposure[b] as f64 } else { (lo + hi) / 2.0 },
            exits: exits_in[b],
            exposure: exposure[b],
            frequency: if exposure[b] > 0 { exits_in[b] as f64 / exposure[b] as f64 } else { 0.0 },
        });
    }

    let tail: Vec<&AgeBin> = stats
        .age_bins
        .iter()
        .filter(|b| b.age >= opts.tail_start && b.exits > 0 && b.exposure > 0)
        .collect();
    stats.tail_bins = tail.len();
    if tail.len() >= opts.min_tail_bins.max(3) {
        let x: Vec<f64> = tail.iter().map(|b| b.age / opts.age_unit).collect();
        let y: Vec<f64> = tail.iter().map(|b| b.frequency.ln()).collect();
        if let Ok(fit) = ols(&x, &y) {
            stats.tail_decay = Some(-fit.slope);
            stats.tail_decay_se = Some(fit.slope_se);
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Geometric, Poisson};

    fn exit(t: u64, age: u64) -> ExitEvent {
        ExitEvent {
            t,
            firm: 1,
            birth: t - age,
            age,
            out_degree: 1,
            wealth: 0.0,
            unpaid_loan: 0.0,
        }
    }

    #[test]
    fn no_exits_leaves_fits_undefined() {
        let s = exit_statistics(&[], &AgeCensus::default(), (0, 100), &Default::default()).unwrap();
        assert!(s.histogram.is_empty());
        assert!(s.exponential_rate.is_none() && s.tail_decay.is_none());
        assert!(!s.exponential_good);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert!(exit_statistics(&[], &AgeCensus::default(), (5, 5), &Default::default()).is_err());
    }

    fn counts_to_events(counts: &[u64]) -> Vec<ExitEvent> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| (0..c).map(move |_| exit(t as u64 + 10, 5)))
            .collect()
    }

    #[test]
    fn geometric_counts_fit_well() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Geometric::new(1.0 - (-0.5f64).exp()).unwrap();
        let counts: Vec<u64> = (0..20_000).map(|_| g.sample(&mut rng)).collect();
        let s = exit_statistics(&counts_to_events(&counts), &AgeCensus::default(), (10, 20_010), &Default::default())
            .unwrap();
        assert!((s.exponential_rate.unwrap() - 0.5).abs() < 0.03, "{:?}", s.exponential_rate);
        assert!(s.exponential_good, "{s:?}");
        assert_eq!(s.histogram.iter().sum::<u64>(), 20_000);
    }

    #[test]
    fn poisson_counts_fit_poorly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Poisson::new(3.0).unwrap();
        let counts: Vec<u64> = (0..20_000).map(|_| p.sample(&mut rng) as u64).collect();
        let s = exit_statistics(&counts_to_events(&counts), &AgeCensus::default(), (10, 20_010), &Default::default())
            .unwrap();
        assert!(!s.exponential_good);
        assert!(s.loglik_poisson.unwrap() > s.loglik_exponential.unwrap());
        assert!((s.mean_exits - 3.0).abs() < 0.05);
    }

    #[test]
    fn histogram_matches_brute_force() {
        let ev = [exit(3, 1), exit(3, 2), exit(5, 1), exit(9, 4), exit(20, 1)];
        let s = exit_statistics(&ev, &AgeCensus::default(), (2, 10), &Default::default()).unwrap();
        // periods 2..10: counts 0,2,0,1,0,0,0,1
        assert_eq!(s.histogram, vec![5, 2, 1]);
        assert_eq!(s.total_exits, 4);
    }

    #[test]
    fn hazard_ratio_and_decay() {
        // Constant population per age with hazard exp(-a age / unit).
        let (a, unit) = (0.12, 100.0);
        let mut census = AgeCensus::default();
        let mut events = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for age in 0..5000u64 {
            let exposure = 2000u64;
            for _ in 0..exposure {
                census.record(age);
            }
            let h = 0.2 * (-a * age as f64 / unit).exp();
            let k = (0..exposure).filter(|_| rng.random::<f64>() < h).count();
            events.extend((0..k).map(|_| exit(10_000, age)));
        }
        let opts = ExitStatsOptions {
            age_unit: unit,
            tail_start: 100.0,
            ..Default::default()
        };
        let s = exit_statistics(&events, &census, (0, 20_000), &opts).unwrap();
        let d = s.tail_decay.unwrap();
        assert!((d - a).abs() < 0.01, "{d}");
        assert!(s.age_bins.iter().all(|b| b.frequency >= 0.0));
        assert_eq!(s.age_bins.iter().map(|b| b.exposure).sum::<u64>(), census.total());
        let b0 = &s.age_bins[0];
        assert!((b0.frequency - b0.exits as f64 / b0.exposure as f64).abs() < 1e-15);
    }
}
