//! General equilibrium with monopolistic markup on a fixed network, and the
//! check that a simulated steady state coincides with it.

use serde::{Deserialize, Serialize};

use crate::ces::{intermediate_split, price_index_unchecked, unit_cost_unchecked};
use crate::error::{Error, Result};
use crate::market::nominal_demands;
use crate::network::ProductionNetwork;
use crate::params::ModelParams;
use crate::state::{EconomyState, SpendingShares};

pub use crate::ces::ces_price_index;

const PRICE_DAMPING: f64 = 0.5;
const PRICE_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100_000;
const FLOW_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    /// Prices in wage units; entry 0 is the wage (1). Inactive slots are 0.
    pub price: Vec<f64>,
    /// Nominal sales per agent; entry 0 is the labor bill.
    pub demand: Vec<f64>,
    /// Output per firm.
    pub quantity: Vec<f64>,
    /// Labor bought by each firm.
    pub labor_flow: Vec<f64>,
    /// Goods bought by each firm from each supplier, aligned with the
    /// supplier lists.
    pub input_flow: Vec<Vec<f64>>,
    /// Goods bought by the household from each firm.
    pub household_flow: Vec<f64>,
    pub household_wealth: f64,
    /// Max relative gap between `(1 - lambda) p_i` and the unit cost at `p`.
    pub markup_residual: f64,
    /// Max relative gap between each seller's sales recomputed from the
    /// flows and its demand, labor market included.
    pub clearing_residual: f64,
}

fn check_network(network: &ProductionNetwork) -> Result<()> {
    if network.active_count() == 0 {
        return Err(Error::Config("network has no active firm".into()));
    }
    if let Some(&i) = network.active_ids().iter().find(|&&i| network.out_degree(i) == 0) {
        return Err(Error::Config(format!("firm {i} has no supplier")));
    }
    Ok(())
}

fn unit_costs(network: &ProductionNetwork, params: &ModelParams, price: &[f64], out: &mut [f64]) {
    for &i in network.active_ids() {
        let sup = network.suppliers(i);
        let index = price_index_unchecked(sup.iter().map(|&j| price[j]), params.theta);
        out[i] = unit_cost_unchecked(1.0, index, sup.len(), params.alpha, params.theta);
    }
}

/// Solves `p_i = unit_cost_i(p) / (1 - lambda)` with unit wage by damped
/// iteration in log prices from unit prices.
pub fn equilibrium_prices(network: &ProductionNetwork, params: &ModelParams) -> Result<Vec<f64>> {
    params.validate()?;
    check_network(network)?;
    let m = network.m();
    let markup = 1.0 / (1.0 - params.lambda);
    let mut price = vec![0.0; m + 1];
    price[0] = 1.0;
    for &i in network.active_ids() {
        price[i] = 1.0;
    }
    let mut cost = vec![0.0; m + 1];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        unit_costs(network, params, &price, &mut cost);
        residual = 0.0f64;
        for &i in network.active_ids() {
            let step = (markup * cost[i]).ln() - price[i].ln();
            residual = residual.max(step.abs());
            price[i] *= (PRICE_DAMPING * step).exp();
        }
        // Distance to the fixed point is about residual / alpha.
        if residual / params.alpha < PRICE_TOLERANCE / 10.0 {
            return Ok(price);
        }
    }
    Err(Error::NonConvergence {
        what: "equilibrium prices",
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Cost-minimizing shares at `price` with uniform household preferences.
pub fn optimal_shares(network: &ProductionNetwork, params: &ModelParams, price: &[f64]) -> SpendingShares {
    let m = network.m();
    let mut shares = SpendingShares {
        household: vec![0.0; m + 1],
        labor: vec![0.0; m + 1],
        inputs: vec![Vec::new(); m + 1],
    };
    shares.reset_household(network);
    let mut p = Vec::new();
    for &i in network.active_ids() {
        let sup = network.suppliers(i);
        p.clear();
        p.extend(sup.iter().map(|&j| price[j]));
        shares.labor[i] = params.alpha;
        shares.inputs[i] = vec![0.0; sup.len()];
        intermediate_split(&p, 1.0 - params.alpha, params.theta, &mut shares.inputs[i]);
    }
    shares
}

/// Nominal flows at equilibrium prices: firm sales `d` solve
/// `d = (1 - lambda) A d + h (1 + lambda sum d)` with `A` the optimal
/// intermediate shares and `h` the household preferences.
pub fn equilibrium_flows(network: &ProductionNetwork, params: &ModelParams, price: &[f64]) -> Result<EquilibriumSolution> {
    params.validate()?;
    check_network(network)?;
    let m = network.m();
    if price.len() != m + 1 {
        return Err(Error::Config(format!("expected {} prices, got {}", m + 1, price.len())));
    }
    if let Some(&i) = network.active_ids().iter().find(|&&i| !(price[i].is_finite() && price[i] > 0.0)) {
        return Err(Error::Domain {
            name: "price",
            value: price[i],
            range: "(0, inf)",
        });
    }
    let lambda = params.lambda;
    let shares = optimal_shares(network, params, price);

    let mut d = vec![0.0; m + 1];
    let mut next = vec![0.0; m + 1];
    for &i in network.active_ids() {
        d[i] = shares.household[i];
    }
    let mut converged = false;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let total: f64 = d.iter().skip(1).sum();
        let w0 = 1.0 + lambda * total;
        for &i in network.active_ids() {
            next[i] = shares.household[i] * w0;
        }
        for &j in network.active_ids() {
            let wj = (1.0 - lambda) * d[j];
            for (&s, &a) in network.suppliers(j).iter().zip(&shares.inputs[j]) {
                next[s] += a * wj;
            }
        }
        change = network
            .active_ids()
            .iter()
            .map(|&i| (next[i] - d[i]).abs() / next[i].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        std::mem::swap(&mut d, &mut next);
        if change < FLOW_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Singular(format!(
            "nominal flow iteration did not settle (last relative change {change:e})"
        )));
    }

    let total: f64 = d.iter().skip(1).sum();
    let household_wealth = 1.0 + lambda * total;
    let mut labor_flow = vec![0.0; m + 1];
    let mut input_flow = vec![Vec::new(); m + 1];
    let mut household_flow = vec![0.0; m + 1];
    let mut quantity = vec![0.0; m + 1];
    let mut sales = vec![0.0; m + 1];
    for &i in network.active_ids() {
        let w = (1.0 - lambda) * d[i];
        labor_flow[i] = shares.labor[i] * w;
        sales[0] += labor_flow[i];
        input_flow[i] = network
            .suppliers(i)
            .iter()
            .zip(&shares.inputs[i])
            .map(|(&s, &a)| a * w / price[s])
            .collect();
        for (&s, &x) in network.suppliers(i).iter().zip(&input_flow[i]) {
            sales[s] += price[s] * x;
        }
        household_flow[i] = shares.household[i] * household_wealth / price[i];
        sales[i] += price[i] * household_flow[i];
        quantity[i] = d[i] / price[i];
    }
    d[0] = sales[0];

    let mut cost = vec![0.0; m + 1];
    unit_costs(network, params, price, &mut cost);
    let mut markup_residual = 0.0f64;
    let mut clearing_residual = (sales[0] - 1.0).abs();
    for &i in network.active_ids() {
        markup_residual = markup_residual.max(((1.0 - lambda) * price[i] - cost[i]).abs() / cost[i]);
        clearing_residual = clearing_residual.max((sales[i] - d[i]).abs() / d[i]);
    }

    Ok(EquilibriumSolution {
        price: price.to_vec(),
        demand: d,
        quantity,
        labor_flow,
        input_flow,
        household_flow,
        household_wealth,
        markup_residual,
        clearing_residual,
    })
}

/// Prices then flows.
pub fn solve_equilibrium(network: &ProductionNetwork, params: &ModelParams) -> Result<EquilibriumSolution> {
    let price = equilibrium_prices(network, params)?;
    equilibrium_flows(network, params, &price)
}

/// Economy state sitting exactly at `solution`: optimal technologies,
/// inventories equal to equilibrium output, wage 1.
pub fn state_at_equilibrium(network: &ProductionNetwork, params: &ModelParams, solution: &EquilibriumSolution) -> EconomyState {
    let m = network.m();
    let mut wealth = vec![0.0; m + 1];
    wealth[0] = solution.household_wealth;
    let mut stock = vec![0.0; m + 1];
    for &i in network.active_ids() {
        wealth[i] = (1.0 - params.lambda) * solution.demand[i];
        stock[i] = solution.quantity[i];
    }
    EconomyState {
        params: ModelParams { m, ..params.clone() },
        t: 0,
        network: network.clone(),
        wealth,
        price: solution.price.clone(),
        stock,
        shares: optimal_shares(network, params, &solution.price),
        loans: vec![0.0; m + 1],
        birth: vec![0; m + 1],
        exited_degrees: Default::default(),
        nominal_exponent: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    /// Max relative deviation of wage-deflated prices from equilibrium.
    pub price_deviation: f64,
    /// Max relative deviation of wage-deflated nominal demand.
    pub demand_deviation: f64,
    /// Max absolute deviation of input shares from the optimal ones.
    pub share_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares a simulated state with the equilibrium of its network.
///
/// `window_start_revision` is the network revision when the stationarity
/// window began; a state whose network has changed since is refused.
pub fn verify_steady_state(state: &EconomyState, window_start_revision: u64, tol: f64) -> Result<SteadyStateReport> {
    let revision = state.network.revision();
    if revision != window_start_revision {
        return Err(Error::NetworkChanged {
            expected: window_start_revision,
            found: revision,
        });
    }
    let sol = solve_equilibrium(&state.network, &state.params)?;
    let wage = state.price[0];
    let demand = nominal_demands(state);
    let optimal = optimal_shares(&state.network, &state.params, &sol.price);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut price_deviation = 0.0f64;
    let mut demand_deviation = rel(demand[0] / wage, sol.demand[0]);
    let mut share_deviation = 0.0f64;
    for &i in state.network.active_ids() {
        price_deviation = price_deviation.max(rel(state.price[i] / wage, sol.price[i]));
        demand_deviation = demand_deviation.max(rel(demand[i] / wage, sol.demand[i]));
        share_deviation = share_deviation.max((state.shares.labor[i] - optimal.labor[i]).abs());
        for (a, b) in state.shares.inputs[i].iter().zip(&optimal.inputs[i]) {
            share_deviation = share_deviation.max((a - b).abs());
        }
    }
    let passed = price_deviation <= tol && demand_deviation <= tol;
    Ok(SteadyStateReport {
        price_deviation,
        demand_deviation,
        share_deviation,
        tolerance: tol,
        passed,
    })
}
