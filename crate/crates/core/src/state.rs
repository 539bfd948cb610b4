//! Economy state, initialization and invariant checks.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ProductionNetwork;
use crate::params::ModelParams;

/// Tolerance on column sums of the spending-share matrix.
pub const SHARE_TOLERANCE: f64 = 1e-12;

/// Spending-share matrix `shares[j][i]`: the fraction of agent `i`'s wealth
/// spent on good `j` (good 0 is labor).
///
/// Stored by column: the household column is a preference vector over
/// firms, and a firm column is its labor share plus one share per supplier,
/// aligned with the firm's supplier list in the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpendingShares {
    pub household: Vec<f64>,
    pub labor: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
}

impl SpendingShares {
    /// `shares[good][agent]` looked up against the network.
    pub fn get(&self, network: &ProductionNetwork, good: usize, agent: usize) -> f64 {
        if agent == 0 {
            return if good == 0 { 0.0 } else { self.household[good] };
        }
        if good == 0 {
            return self.labor[agent];
        }
        network
            .suppliers(agent)
            .iter()
            .position(|&s| s == good)
            .map_or(0.0, |k| self.inputs[agent][k])
    }

    pub fn column_sum(&self, agent: usize) -> f64 {
        if agent == 0 {
            self.household.iter().sum()
        } else {
            self.labor[agent] + self.inputs[agent].iter().sum::<f64>()
        }
    }

    /// Uniform preferences over the active firms.
    pub(crate) fn reset_household(&mut self, network: &ProductionNetwork) {
        self.household.iter_mut().for_each(|x| *x = 0.0);
        let n = network.active_count();
        if n > 0 {
            let share = 1.0 / n as f64;
            for &i in network.active_ids() {
                self.household[i] = share;
            }
        }
    }

    /// Labor share `alpha`, intermediates split evenly.
    pub(crate) fn set_uniform_technology(&mut self, firm: usize, n_suppliers: usize, alpha: f64) {
        self.labor[firm] = alpha;
        self.inputs[firm] = vec![(1.0 - alpha) / n_suppliers as f64; n_suppliers];
    }
}

/// Running mean of out-degrees of firms that have left the market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ExitedDegreeMean {
    pub sum: f64,
    pub count: u64,
}

impl ExitedDegreeMean {
    pub fn record(&mut self, out_degree: usize) {
        self.sum += out_degree as f64;
        self.count += 1;
    }

    /// Mean over all exits so far, or `fallback` before the first exit.
    pub fn mean_or(&self, fallback: f64) -> f64 {
        if self.count == 0 {
            fallback
        } else {
            self.sum / self.count as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyState {
    pub params: ModelParams,
    pub t: u64,
    pub network: ProductionNetwork,
    /// Money held; index 0 is the household.
    pub wealth: Vec<f64>,
    /// Posted prices; index 0 is the wage.
    pub price: Vec<f64>,
    /// Inventories; the household entry is unused (labor is perishable).
    pub stock: Vec<f64>,
    pub shares: SpendingShares,
    /// Outstanding entry loans.
    pub loans: Vec<f64>,
    /// Period of entry per slot.
    pub birth: Vec<u64>,
    pub exited_degrees: ExitedDegreeMean,
    /// Money and prices are stored divided by `2^nominal_exponent`.
    #[serde(default)]
    pub nominal_exponent: i32,
}

impl EconomyState {
    pub fn m(&self) -> usize {
        self.params.m
    }

    /// Natural log of the wage in the units of the initial state.
    pub fn log_wage(&self) -> f64 {
        self.price[0].ln() + self.nominal_exponent as f64 * std::f64::consts::LN_2
    }

    /// Keeps the wage within `[2^-256, 2^256]` by scaling every price,
    /// wealth and loan by a power of two. The scaling is exact and the
    /// dynamics are homogeneous of degree one in nominal values, so the
    /// trajectory is unchanged.
    pub(crate) fn renormalize_nominal(&mut self) {
        let e = self.price[0].log2();
        if e.abs() <= 256.0 || !e.is_finite() {
            return;
        }
        let k = -(e.round() as i32);
        let f = 2f64.powi(k);
        for v in self.price.iter_mut().chain(self.wealth.iter_mut()).chain(self.loans.iter_mut()) {
            *v *= f;
        }
        self.nominal_exponent -= k;
    }

    pub fn age(&self, firm: usize) -> u64 {
        self.t.saturating_sub(self.birth[firm])
    }

    /// Total money held by all agents.
    pub fn total_money(&self) -> f64 {
        self.wealth.iter().sum()
    }

    /// Average out-degree of exited firms, `mean_out_degree` before any exit.
    pub fn mean_exited_out_degree(&self) -> f64 {
        self.exited_degrees.mean_or(self.params.mean_out_degree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum OutDegreeLaw {
    /// `B(m - 1, mean / (m - 1))`, redrawn on zero.
    Binomial,
    Fixed { k: usize },
    /// One entry per firm.
    Explicit { degrees: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub out_degree: OutDegreeLaw,
    pub initial_price: f64,
    /// Total money, split evenly across household and firms.
    pub total_money: f64,
    /// Rewire links so that every firm starts with at least one firm client.
    pub ensure_clients: bool,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            out_degree: OutDegreeLaw::Binomial,
            initial_price: 1.0,
            total_money: 1.0,
            ensure_clients: true,
        }
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_out_degrees(params: &ModelParams, spec: &InitSpec, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let m = params.m;
    let degrees = match &spec.out_degree {
        OutDegreeLaw::Binomial => {
            let trials = (m - 1) as u64;
            let p = params.mean_out_degree / trials as f64;
            let dist = Binomial::new(trials, p)
                .map_err(|e| Error::Config(format!("initial out-degree law: {e}")))?;
            (0..m)
                .map(|_| loop {
                    let k = dist.sample(rng) as usize;
                    if k > 0 {
                        break k;
                    }
                })
                .collect()
        }
        OutDegreeLaw::Fixed { k } => vec![*k; m],
        OutDegreeLaw::Explicit { degrees } => {
            if degrees.len() != m {
                return Err(Error::Config(format!(
                    "explicit out-degrees: expected {m} entries, got {}",
                    degrees.len()
                )));
            }
            degrees.clone()
        }
    };
    if let Some(bad) = degrees.iter().find(|&&k| k == 0 || k > m - 1) {
        return Err(Error::Config(format!(
            "out-degree {bad} outside [1, {}]",
            m - 1
        )));
    }
    Ok(degrees)
}

/// Gives every firm without clients one client, taking the link from a
/// supplier that has more than one client.
fn ensure_clients(m: usize, suppliers: &mut [Vec<usize>], rng: &mut ChaCha8Rng) {
    let mut in_degree = vec![0usize; m + 1];
    for s in suppliers.iter().skip(1) {
        for &j in s {
            in_degree[j] += 1;
        }
    }
    for j in 1..=m {
        if in_degree[j] > 0 {
            continue;
        }
        // Random buyers first, then an exhaustive scan.
        let mut order: Vec<usize> = (1..=m).filter(|&i| i != j).collect();
        for k in (1..order.len()).rev() {
            let r = rng.random_range(0..=k);
            order.swap(k, r);
        }
        'buyers: for &i in &order {
            if suppliers[i].contains(&j) {
                continue;
            }
            for pos in 0..suppliers[i].len() {
                let s = suppliers[i][pos];
                if in_degree[s] >= 2 {
                    suppliers[i][pos] = j;
                    in_degree[s] -= 1;
                    in_degree[j] += 1;
                    break 'buyers;
                }
            }
        }
    }
}

/// Builds a fresh economy. Same `(params, spec, seed)` give identical states.
pub fn init_economy(params: &ModelParams, spec: &InitSpec, seed: u64) -> Result<EconomyState> {
    params.validate()?;
    let m = params.m;
    if m < 3 {
        return Err(Error::Config(format!("need at least 3 firms, got m = {m}")));
    }
    if params.mean_out_degree >= (m - 1) as f64 {
        return Err(Error::Config(format!(
            "mean out-degree {} must be below m - 1 = {}",
            params.mean_out_degree,
            m - 1
        )));
    }
    if !(spec.initial_price.is_finite() && spec.initial_price > 0.0) {
        return Err(Error::Config("initial price must be positive".into()));
    }
    if !(spec.total_money.is_finite() && spec.total_money > 0.0) {
        return Err(Error::Config("total money must be positive".into()));
    }

    let mut rng = stream_rng(seed, 0);
    let degrees = draw_out_degrees(params, spec, &mut rng)?;

    let mut suppliers = vec![Vec::new(); m + 1];
    for i in 1..=m {
        // Sample among the m - 1 other firms.
        suppliers[i] = index::sample(&mut rng, m - 1, degrees[i - 1])
            .into_iter()
            .map(|x| if x + 1 >= i { x + 2 } else { x + 1 })
            .collect();
    }
    if spec.ensure_clients {
        ensure_clients(m, &mut suppliers, &mut rng);
    }
    let mut active = vec![true; m + 1];
    active[0] = false;
    let network = ProductionNetwork::from_suppliers(m, suppliers, active);

    let alpha = params.alpha;
    let mut shares = SpendingShares {
        household: vec![0.0; m + 1],
        labor: vec![0.0; m + 1],
        inputs: vec![Vec::new(); m + 1],
    };
    shares.reset_household(&network);
    for i in 1..=m {
        shares.set_uniform_technology(i, network.out_degree(i), alpha);
    }

    let w = spec.total_money / (m + 1) as f64;
    let p = spec.initial_price;
    let wealth = vec![w; m + 1];
    let price = vec![p; m + 1];
    let tech = params.technology();
    let mut stock = vec![0.0; m + 1];
    for i in 1..=m {
        let labor = shares.labor[i] * w / p;
        let inputs = shares.inputs[i].iter().map(|a| a * w / p);
        stock[i] = tech.output(labor, inputs);
    }

    Ok(EconomyState {
        params: params.clone(),
        t: 0,
        network,
        wealth,
        price,
        stock,
        shares,
        loans: vec![0.0; m + 1],
        birth: vec![0; m + 1],
        exited_degrees: ExitedDegreeMean::default(),
        nominal_exponent: 0,
    })
}

/// Every type invariant the state breaks, one message per violation.
pub fn validate_state(state: &EconomyState) -> Vec<String> {
    let mut out = state.network.violations();
    let m = state.m();
    let net = &state.network;
    let sh = &state.shares;
    let lens = [
        ("wealth", state.wealth.len()),
        ("price", state.price.len()),
        ("stock", state.stock.len()),
        ("loans", state.loans.len()),
        ("birth", state.birth.len()),
        ("household shares", sh.household.len()),
        ("labor shares", sh.labor.len()),
        ("input shares", sh.inputs.len()),
    ];
    for (name, len) in lens {
        if len != m + 1 {
            out.push(format!("{name} has length {len}, expected {}", m + 1));
        }
    }
    if !out.is_empty() && lens.iter().any(|(_, l)| *l != m + 1) {
        return out;
    }

    let hh = sh.column_sum(0);
    if (hh - 1.0).abs() > SHARE_TOLERANCE {
        out.push(format!("household share column sums to {hh}"));
    }
    for j in 1..=m {
        let x = sh.household[j];
        if net.is_active(j) {
            if !(x > 0.0) {
                out.push(format!("household share of active firm {j} is {x}"));
            }
        } else if x != 0.0 {
            out.push(format!("household spends share {x} on inactive firm {j}"));
        }
    }
    if !(state.price[0].is_finite() && state.price[0] > 0.0) {
        out.push(format!("wage {} is not positive", state.price[0]));
    }
    if !(state.wealth[0].is_finite() && state.wealth[0] >= 0.0) {
        out.push(format!("household wealth {} is negative", state.wealth[0]));
    }

    for &i in net.active_ids() {
        let inputs = &sh.inputs[i];
        if inputs.len() != net.out_degree(i) {
            out.push(format!(
                "firm {i}: {} input shares for {} suppliers",
                inputs.len(),
                net.out_degree(i)
            ));
        }
        if sh.labor[i] < 0.0 || inputs.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            out.push(format!("firm {i} has a negative share"));
        }
        let col = sh.column_sum(i);
        if (col - 1.0).abs() > SHARE_TOLERANCE {
            out.push(format!("firm {i}: share column sums to {col}"));
        }
        if !(state.price[i].is_finite() && state.price[i] > 0.0) {
            out.push(format!("firm {i}: price {} is not positive", state.price[i]));
        }
        if !(state.stock[i].is_finite() && state.stock[i] >= 0.0) {
            out.push(format!("firm {i}: stock {} is negative", state.stock[i]));
        }
        if !(state.wealth[i].is_finite() && state.wealth[i] >= 0.0) {
            out.push(format!("firm {i}: wealth {} is negative", state.wealth[i]));
        }
        if !(state.loans[i].is_finite() && state.loans[i] >= 0.0) {
            out.push(format!("firm {i}: loan {} is negative", state.loans[i]));
        }
    }
    out
}
