//! One period of out-of-equilibrium market dynamics on a given network.
//!
//! The period runs, from the period-start snapshot: nominal demands, price
//! adjustment, trade settlement with proportional rationing, production,
//! wealth update and technology adjustment. [`step_period`] composes them
//! and commits the result atomically.

use serde::{Deserialize, Serialize};

use crate::ces::{intermediate_split, intermediate_split_log};
use crate::error::{Error, Result};
use crate::params::ProductionInputs;
use crate::state::EconomyState;

/// Goods delivered to each buyer, after rationing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Deliveries {
    /// Labor received by each firm.
    pub labor: Vec<f64>,
    /// Quantity of each firm's good bought by the household.
    pub household: Vec<f64>,
    offsets: Vec<usize>,
    flat: Vec<f64>,
}

impl Deliveries {
    /// Quantities firm `i` received, aligned with its supplier list.
    pub fn inputs(&self, firm: usize) -> &[f64] {
        &self.flat[self.offsets[firm]..self.offsets[firm + 1]]
    }
}

/// Aggregate series reported every period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodDiagnostics {
    pub t: u64,
    /// Log change of the sales-weighted firm price index.
    pub inflation: f64,
    /// `(sum p_i q_i - sum d_i) / sum d_i` over firms: value of stocks at
    /// posted prices against nominal demand. Negative means excess demand.
    pub excess_supply: f64,
    /// Share of firms' nominal demand left unserved by rationing.
    pub unmet_demand: f64,
    /// Real output of all firms.
    pub total_production: f64,
    /// Mean dividend per active firm, in wage units.
    pub avg_profit: f64,
    pub wage: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeriodOutcome {
    /// Money each agent's good is demanded for.
    pub nominal_demand: Vec<f64>,
    /// Market-clearing price given demand and stock.
    pub market_price: Vec<f64>,
    /// Posted price after frictional adjustment.
    pub price: Vec<f64>,
    /// Fraction of each seller's orders that is served.
    pub fill_ratio: Vec<f64>,
    pub sold_qty: Vec<f64>,
    pub delivered: Deliveries,
    pub production: Vec<f64>,
    pub diagnostics: PeriodDiagnostics,
}

impl PeriodOutcome {
    /// Money paid to each seller.
    pub fn revenue(&self, agent: usize) -> f64 {
        self.sold_qty[agent] * self.price[agent]
    }
}

/// Result of the wealth update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WealthUpdate {
    pub wealth: Vec<f64>,
    pub loans: Vec<f64>,
    /// Dividend paid by each firm after loan service.
    pub dividends: Vec<f64>,
}

/// `demand_i = sum_j shares[i][j] * wealth_j` over active agents.
pub fn nominal_demands(state: &EconomyState) -> Vec<f64> {
    let mut d = Vec::new();
    nominal_demands_into(state, &mut d);
    d
}

fn nominal_demands_into(state: &EconomyState, d: &mut Vec<f64>) {
    let m = state.m();
    let net = &state.network;
    let sh = &state.shares;
    let w = &state.wealth;
    d.clear();
    d.resize(m + 1, 0.0);
    for &j in net.active_ids() {
        d[j] = sh.household[j] * w[0];
    }
    for &i in net.active_ids() {
        let wi = w[i];
        d[0] += sh.labor[i] * wi;
        for (&s, &a) in net.suppliers(i).iter().zip(&sh.inputs[i]) {
            d[s] += a * wi;
        }
    }
}

/// Posted firm prices stay within this factor of the wage, above or below.
pub const RELATIVE_PRICE_BOUND: f64 = 2.037035976334486e90; // 2^300

/// Market-clearing prices and frictionally adjusted prices, in that order.
///
/// The household sells one unit of labor per period. A firm with an empty
/// stock and positive demand has its clearing price capped at
/// `price_cap_factor` times its previous price. Posted firm prices are
/// clamped to `wage / RELATIVE_PRICE_BOUND ..= wage * RELATIVE_PRICE_BOUND`.
pub fn update_prices(state: &EconomyState, demand: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut clearing = Vec::new();
    let mut posted = Vec::new();
    update_prices_into(state, demand, &mut clearing, &mut posted);
    (clearing, posted)
}

fn update_prices_into(state: &EconomyState, demand: &[f64], clearing: &mut Vec<f64>, posted: &mut Vec<f64>) {
    let m = state.m();
    let tau = state.params.tau_p;
    let cap = state.params.price_cap_factor;
    clearing.clear();
    clearing.resize(m + 1, 0.0);
    posted.clear();
    posted.extend_from_slice(&state.price);

    clearing[0] = demand[0];
    posted[0] = tau * clearing[0] + (1.0 - tau) * state.price[0];
    let (lo, hi) = (posted[0] / RELATIVE_PRICE_BOUND, posted[0] * RELATIVE_PRICE_BOUND);
    for &i in state.network.active_ids() {
        let q = state.stock[i];
        let prev = state.price[i];
        clearing[i] = if q > 0.0 {
            demand[i] / q
        } else if demand[i] > 0.0 {
            cap * prev
        } else {
            0.0
        };
        posted[i] = (tau * clearing[i] + (1.0 - tau) * prev).clamp(lo, hi);
    }
}

/// Sells stock at posted prices, rationing buyers proportionally to their
/// orders when demand exceeds supply.
pub fn settle_trades(state: &EconomyState, demand: &[f64], price: &[f64]) -> PeriodOutcome {
    let mut out = PeriodOutcome::default();
    settle_trades_into(state, demand, price, &mut out);
    out.nominal_demand = demand.to_vec();
    out.price = price.to_vec();
    out
}

fn settle_trades_into(state: &EconomyState, demand: &[f64], price: &[f64], out: &mut PeriodOutcome) {
    let m = state.m();
    let net = &state.network;
    let sh = &state.shares;
    let w = &state.wealth;

    let fill = &mut out.fill_ratio;
    fill.clear();
    fill.resize(m + 1, 1.0);
    let sold = &mut out.sold_qty;
    sold.clear();
    sold.resize(m + 1, 0.0);

    // Labor: one unit per period, perishable.
    if demand[0] > 0.0 {
        fill[0] = (price[0] / demand[0]).min(1.0);
        sold[0] = fill[0] * demand[0] / price[0];
    }
    for &i in net.active_ids() {
        if demand[i] > 0.0 {
            fill[i] = (price[i] * state.stock[i] / demand[i]).min(1.0);
            sold[i] = fill[i] * demand[i] / price[i];
        }
    }

    let del = &mut out.delivered;
    del.labor.clear();
    del.labor.resize(m + 1, 0.0);
    del.household.clear();
    del.household.resize(m + 1, 0.0);
    del.offsets.clear();
    del.offsets.reserve(m + 2);
    del.flat.clear();
    del.offsets.push(0);
    for i in 0..=m {
        if i > 0 && net.is_active(i) {
            let wi = w[i];
            del.labor[i] = fill[0] * sh.labor[i] * wi / price[0];
            for (&s, &a) in net.suppliers(i).iter().zip(&sh.inputs[i]) {
                del.flat.push(fill[s] * a * wi / price[s]);
            }
            del.household[i] = fill[i] * sh.household[i] * w[0] / price[i];
        }
        del.offsets.push(del.flat.len());
    }
}

/// Output of each firm from the inputs it purchased this period.
pub fn produce(state: &EconomyState, outcome: &PeriodOutcome) -> Vec<f64> {
    let mut y = Vec::new();
    produce_into(state, outcome, &mut y);
    y
}

fn produce_into(state: &EconomyState, outcome: &PeriodOutcome, y: &mut Vec<f64>) {
    let m = state.m();
    let tech = state.params.technology();
    let net = &state.network;
    y.clear();
    y.resize(m + 1, 0.0);
    match state.params.production_inputs {
        ProductionInputs::Delivered => {
            for &i in net.active_ids() {
                let inputs = outcome.delivered.inputs(i).iter().copied();
                y[i] = tech.output(outcome.delivered.labor[i], inputs);
            }
        }
        ProductionInputs::Intended => {
            let sh = &state.shares;
            let p = &outcome.price;
            for &i in net.active_ids() {
                let wi = state.wealth[i];
                let labor = sh.labor[i] * wi / p[0];
                let inputs = net
                    .suppliers(i)
                    .iter()
                    .zip(&sh.inputs[i])
                    .map(|(&s, &a)| a * wi / p[s]);
                y[i] = tech.output(labor, inputs);
            }
        }
    }
}

/// Next-period wealth: firms keep `1 - lambda` of revenue for spending; the
/// rest first repays any entry loan and then goes to the household as a
/// dividend. With `conserve_money`, buyers get back what rationing left
/// unspent.
pub fn update_wealth(state: &EconomyState, outcome: &PeriodOutcome) -> WealthUpdate {
    let mut up = WealthUpdate::default();
    update_wealth_into(state, outcome, &mut up);
    up
}

fn update_wealth_into(state: &EconomyState, outcome: &PeriodOutcome, up: &mut WealthUpdate) {
    let m = state.m();
    let lambda = state.params.lambda;
    let net = &state.network;
    up.wealth.clear();
    up.wealth.resize(m + 1, 0.0);
    up.loans.clear();
    up.loans.extend_from_slice(&state.loans);
    up.dividends.clear();
    up.dividends.resize(m + 1, 0.0);

    let mut household = outcome.revenue(0);
    for &i in net.active_ids() {
        let revenue = outcome.revenue(i);
        up.wealth[i] = (1.0 - lambda) * revenue;
        let retained = lambda * revenue;
        let service = retained.min(up.loans[i]);
        up.loans[i] -= service;
        up.dividends[i] = retained - service;
        household += retained;
    }
    // Money held by inactive slots (none in practice) stays put.
    for i in 1..=m {
        if !net.is_active(i) {
            up.wealth[i] = state.wealth[i];
        }
    }

    if state.params.conserve_money {
        let fill = &outcome.fill_ratio;
        let sh = &state.shares;
        let w = &state.wealth;
        let mut refund0 = 0.0;
        for &j in net.active_ids() {
            refund0 += (1.0 - fill[j]) * sh.household[j] * w[0];
        }
        household += refund0;
        for &i in net.active_ids() {
            let mut unspent = (1.0 - fill[0]) * sh.labor[i];
            for (&s, &a) in net.suppliers(i).iter().zip(&sh.inputs[i]) {
                unspent += (1.0 - fill[s]) * a;
            }
            up.wealth[i] += unspent * w[i];
        }
    }
    up.wealth[0] = household;
}

/// Moves every firm's technology a step `tau_w` towards the cost-minimizing
/// shares at `price`. The household column is left unchanged.
pub fn update_input_shares(state: &mut EconomyState, price: &[f64]) {
    let mut scratch = (Vec::new(), Vec::new());
    update_input_shares_with(state, price, &mut scratch);
}

fn update_input_shares_with(state: &mut EconomyState, price: &[f64], scratch: &mut (Vec<f64>, Vec<f64>)) {
    let tau = state.params.tau_w;
    let alpha = state.params.alpha;
    let theta = state.params.theta;
    if tau == 0.0 {
        return;
    }
    let (prices, target) = scratch;
    let use_logs = theta > 0.0 && theta < 1.0 && theta != 0.5;
    let EconomyState { network, shares, .. } = state;
    let log_price: Vec<f64> = if use_logs {
        price.iter().map(|p| (p / price[0]).ln()).collect()
    } else {
        Vec::new()
    };
    for &i in network.active_ids() {
        let sup = network.suppliers(i);
        prices.clear();
        target.clear();
        target.resize(sup.len(), 0.0);
        if use_logs {
            prices.extend(sup.iter().map(|&s| log_price[s]));
            intermediate_split_log(prices, 1.0 - alpha, theta, target);
        } else {
            prices.extend(sup.iter().map(|&s| price[s]));
            intermediate_split(prices, 1.0 - alpha, theta, target);
        }
        shares.labor[i] = tau * alpha + (1.0 - tau) * shares.labor[i];
        for (a, &t) in shares.inputs[i].iter_mut().zip(target.iter()) {
            *a = tau * t + (1.0 - tau) * *a;
        }
    }
}

/// Reusable buffers for [`step_period_with`].
#[derive(Debug, Default)]
pub struct PeriodWorkspace {
    pub outcome: PeriodOutcome,
    wealth: WealthUpdate,
    scratch: (Vec<f64>, Vec<f64>),
}

/// Runs one period and returns its outcome.
pub fn step_period(state: &mut EconomyState) -> Result<PeriodOutcome> {
    let mut ws = PeriodWorkspace::default();
    step_period_with(state, &mut ws)?;
    Ok(ws.outcome)
}

/// Runs one period reusing `ws`; the outcome is left in `ws.outcome`.
/// On error the state is untouched.
pub fn step_period_with(state: &mut EconomyState, ws: &mut PeriodWorkspace) -> Result<()> {
    let out = &mut ws.outcome;
    nominal_demands_into(state, &mut out.nominal_demand);
    update_prices_into(state, &out.nominal_demand, &mut out.market_price, &mut out.price);

    let net = &state.network;
    if !(out.price[0].is_finite() && out.price[0] > 0.0) {
        return Err(Error::Invariant {
            period: state.t,
            details: format!("wage became {}", out.price[0]),
        });
    }
    if let Some(&i) = net
        .active_ids()
        .iter()
        .find(|&&i| !(out.price[i].is_finite() && out.price[i] > 0.0))
    {
        return Err(Error::Invariant {
            period: state.t,
            details: format!("price of firm {i} became {}", out.price[i]),
        });
    }

    let demand = std::mem::take(&mut out.nominal_demand);
    let price = std::mem::take(&mut out.price);
    settle_trades_into(state, &demand, &price, out);
    out.nominal_demand = demand;
    out.price = price;

    let mut production = std::mem::take(&mut out.production);
    produce_into(state, out, &mut production);
    out.production = production;

    update_wealth_into(state, out, &mut ws.wealth);

    // Diagnostics from the period-start snapshot and this period's trades.
    let net = &state.network;
    let mut value_now = 0.0;
    let mut value_prev = 0.0;
    let mut supply_value = 0.0;
    let mut demand_total = 0.0;
    let mut served = 0.0;
    let mut total_production = 0.0;
    let mut dividends = 0.0;
    for &i in net.active_ids() {
        value_now += out.price[i] * out.sold_qty[i];
        value_prev += state.price[i] * out.sold_qty[i];
        supply_value += out.price[i] * state.stock[i];
        demand_total += out.nominal_demand[i];
        served += out.price[i] * out.sold_qty[i];
        total_production += out.production[i];
        dividends += ws.wealth.dividends[i];
    }
    let wage = out.price[0];
    let active = net.active_count().max(1) as f64;
    out.diagnostics = PeriodDiagnostics {
        t: state.t,
        inflation: if value_now > 0.0 && value_prev > 0.0 {
            (value_now / value_prev).ln()
        } else {
            0.0
        },
        excess_supply: if demand_total > 0.0 {
            (supply_value - demand_total) / demand_total
        } else {
            0.0
        },
        unmet_demand: if demand_total > 0.0 {
            ((demand_total - served) / demand_total).max(0.0)
        } else {
            0.0
        },
        total_production,
        avg_profit: dividends / active / wage,
        wage,
    };

    // Commit.
    for &i in state.network.active_ids() {
        let next = state.stock[i] - out.sold_qty[i] + out.production[i];
        state.stock[i] = next.max(0.0);
    }
    std::mem::swap(&mut state.wealth, &mut ws.wealth.wealth);
    std::mem::swap(&mut state.loans, &mut ws.wealth.loans);
    state.price.copy_from_slice(&out.price);
    let price = std::mem::take(&mut out.price);
    update_input_shares_with(state, &price, &mut ws.scratch);
    out.price = price;
    state.t += 1;
    state.renormalize_nominal();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ProductionNetwork;
    use crate::params::ModelParams;
    use crate::state::{init_economy, validate_state, InitSpec, SpendingShares};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hand-built state: suppliers given per firm, explicit numbers.
    fn toy(
        params: ModelParams,
        suppliers: Vec<Vec<usize>>,
        wealth: Vec<f64>,
        price: Vec<f64>,
        stock: Vec<f64>,
    ) -> EconomyState {
        let m = suppliers.len() - 1;
        let params = ModelParams { m, ..params };
        let mut active = vec![true; m + 1];
        active[0] = false;
        let network = ProductionNetwork::from_suppliers(m, suppliers, active);
        let mut shares = SpendingShares {
            household: vec![0.0; m + 1],
            labor: vec![0.0; m + 1],
            inputs: vec![Vec::new(); m + 1],
        };
        shares.reset_household(&network);
        for i in 1..=m {
            shares.set_uniform_technology(i, network.out_degree(i), params.alpha);
        }
        EconomyState {
            params,
            t: 0,
            network,
            wealth,
            price,
            stock,
            shares,
            loans: vec![0.0; m + 1],
            birth: vec![0; m + 1],
            exited_degrees: Default::default(),
            nominal_exponent: 0,
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, m: usize) -> EconomyState {
        let mut suppliers = vec![Vec::new(); m + 1];
        for i in 1..=m {
            let k = rng.random_range(1..m);
            let mut others: Vec<usize> = (1..=m).filter(|&j| j != i).collect();
            for a in (1..others.len()).rev() {
                let b = rng.random_range(0..=a);
                others.swap(a, b);
            }
            others.truncate(k);
            suppliers[i] = others;
        }
        let wealth = (0..=m).map(|_| rng.random_range(0.1..2.0)).collect();
        let price = (0..=m).map(|_| rng.random_range(0.5..2.0)).collect();
        let stock = (0..=m).map(|_| rng.random_range(0.0..1.5)).collect();
        let mut s = toy(ModelParams::default(), suppliers, wealth, price, stock);
        for i in 0..=m {
            if i == 0 {
                let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
                let tot: f64 = raw.iter().sum();
                for j in 1..=m {
                    s.shares.household[j] = raw[j - 1] / tot;
                }
            } else {
                let n = s.network.out_degree(i);
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
                let tot: f64 = raw.iter().sum();
                s.shares.inputs[i] = raw.iter().map(|x| x / tot * 0.75).collect();
            }
        }
        s
    }

    #[test]
    fn single_firm_gets_all_household_money() {
        // Firm 1 buys from firm 2 and vice versa; household prefers firm 1 only.
        let mut s = toy(
            ModelParams::default(),
            vec![vec![], vec![2], vec![1]],
            vec![1.0, 0.0, 0.0],
            vec![1.0; 3],
            vec![0.0, 1.0, 1.0],
        );
        s.shares.household = vec![0.0, 1.0, 0.0];
        let d = nominal_demands(&s);
        assert_eq!(d, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn symmetric_firms_get_equal_demand() {
        let s = toy(
            ModelParams::default(),
            vec![vec![], vec![2], vec![1]],
            vec![1.0, 0.5, 0.5],
            vec![1.0; 3],
            vec![0.0, 1.0, 1.0],
        );
        let d = nominal_demands(&s);
        assert!((d[1] - d[2]).abs() < 1e-15);
        // labor: 0.25 * (0.5 + 0.5)
        assert!((d[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn demands_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let s = random_state(&mut rng, 5);
            let d = nominal_demands(&s);
            for good in 0..=5 {
                let mut expect = 0.0;
                for agent in 0..=5 {
                    expect += s.shares.get(&s.network, good, agent) * s.wealth[agent];
                }
                assert!((d[good] - expect).abs() < 1e-14, "good {good}");
            }
        }
    }

    #[test]
    fn price_examples() {
        let params = ModelParams {
            tau_p: 1.0,
            ..Default::default()
        };
        let s = toy(params, vec![vec![], vec![2], vec![1]], vec![1.0; 3], vec![1.0; 3], vec![0.0, 2.0, 2.0]);
        let (clearing, posted) = update_prices(&s, &[1.0, 4.0, 4.0]);
        assert_eq!(clearing[1], 2.0);
        assert_eq!(posted[1], 2.0);

        let params = ModelParams {
            tau_p: 0.5,
            ..Default::default()
        };
        let s = toy(params, vec![vec![], vec![2], vec![1]], vec![1.0; 3], vec![1.0; 3], vec![0.0, 1.0, 1.0]);
        let (_, posted) = update_prices(&s, &[1.0, 2.0, 2.0]);
        assert_eq!(posted[1], 1.5);
    }

    #[test]
    fn empty_stock_price_is_capped() {
        let params = ModelParams {
            tau_p: 1.0,
            ..Default::default()
        };
        let s = toy(params, vec![vec![], vec![2], vec![1]], vec![1.0; 3], vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0]);
        let (clearing, posted) = update_prices(&s, &[1.0, 5.0, 1.0]);
        assert_eq!(clearing[1], 20.0);
        assert_eq!(posted[1], 20.0);
    }

    #[test]
    fn proportional_rationing() {
        // Firm 3 has one unit at price 1; firms 1 and 2 each order 0.6.
        let mut s = toy(
            ModelParams::default(),
            vec![vec![], vec![3], vec![3], vec![1]],
            vec![0.0, 0.8, 0.8, 0.0],
            vec![1.0; 4],
            vec![0.0, 1.0, 1.0, 1.0],
        );
        s.shares.labor = vec![0.0, 0.25, 0.25, 0.25];
        s.shares.inputs[1] = vec![0.75];
        s.shares.inputs[2] = vec![0.75];
        let d = nominal_demands(&s);
        assert!((d[3] - 1.2).abs() < 1e-15);
        let out = settle_trades(&s, &d, &s.price);
        assert!((out.sold_qty[3] - 1.0).abs() < 1e-15);
        assert!((out.delivered.inputs(1)[0] - 0.5).abs() < 1e-15);
        assert!((out.delivered.inputs(2)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deliveries_match_per_buyer_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let s = random_state(&mut rng, 6);
            let d = nominal_demands(&s);
            let (_, p) = update_prices(&s, &d);
            let out = settle_trades(&s, &d, &p);
            for seller in 1..=6 {
                let supply = s.stock[seller];
                let wanted = d[seller] / p[seller];
                let mut delivered_total = 0.0;
                for buyer in 0..=6 {
                    let order = s.shares.get(&s.network, seller, buyer) * s.wealth[buyer] / p[seller];
                    let expect = if wanted <= supply { order } else { supply * order / wanted };
                    let got = if buyer == 0 {
                        out.delivered.household[seller]
                    } else {
                        s.network
                            .suppliers(buyer)
                            .iter()
                            .position(|&x| x == seller)
                            .map_or(0.0, |k| out.delivered.inputs(buyer)[k])
                    };
                    assert!((got - expect).abs() < 1e-13, "seller {seller} buyer {buyer}");
                    delivered_total += got;
                }
                assert!((delivered_total - out.sold_qty[seller]).abs() < 1e-13);
                assert!(out.sold_qty[seller] <= supply + 1e-13);
            }
        }
    }

    #[test]
    fn three_firm_chain_production() {
        // Firm 1 <- 2 <- 3 <- 1; hand-set prices and wealths, no rationing.
        let params = ModelParams {
            tau_p: 0.0,
            alpha: 0.5,
            theta: 0.5,
            ..Default::default()
        };
        let mut s = toy(
            params,
            vec![vec![], vec![2], vec![3], vec![1]],
            vec![3.0, 1.0, 2.0, 4.0],
            vec![2.0, 1.0, 4.0, 0.5],
            vec![0.0, 100.0, 100.0, 100.0],
        );
        s.shares.labor = vec![0.0, 0.5, 0.5, 0.5];
        s.shares.inputs = vec![vec![], vec![0.5], vec![0.5], vec![0.5]];
        let d = nominal_demands(&s);
        let (_, p) = update_prices(&s, &d);
        // Labor demand 0.5 * (1 + 2 + 4) = 3.5 > wage 2: labor is rationed.
        let out = settle_trades(&s, &d, &p);
        let y = produce(&s, &out);
        let fill0: f64 = 2.0 / 3.5;
        // firm 1: labor 0.5 * 1 / 2 * fill0, input from firm 2: 0.5 * 1 / 4
        let expect1 = (0.25 * fill0).sqrt() * (0.125f64).sqrt().powf(1.0);
        let expect2 = (0.5 * fill0).sqrt() * (0.5f64 * 2.0 / 0.5).sqrt();
        let expect3 = (1.0 * fill0).sqrt() * (0.5f64 * 4.0 / 1.0).sqrt();
        assert!((y[1] - expect1).abs() < 1e-14, "{} vs {expect1}", y[1]);
        assert!((y[2] - expect2).abs() < 1e-14);
        assert!((y[3] - expect3).abs() < 1e-14);

        // Intended inputs ignore the labor rationing.
        s.params.production_inputs = ProductionInputs::Intended;
        let y = produce(&s, &out);
        assert!((y[1] - 0.25f64.sqrt() * 0.125f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn no_inputs_no_output() {
        let s = toy(
            ModelParams::default(),
            vec![vec![], vec![2], vec![1]],
            vec![1.0, 0.0, 0.0],
            vec![1.0; 3],
            vec![0.0, 1.0, 1.0],
        );
        let d = nominal_demands(&s);
        let out = settle_trades(&s, &d, &s.price);
        let y = produce(&s, &out);
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn dividends_and_loan_service() {
        let mut s = toy(
            ModelParams::default(),
            vec![vec![], vec![2], vec![1]],
            vec![0.0, 1.0, 0.0],
            vec![1.0; 3],
            vec![0.0, 10.0, 10.0],
        );
        s.shares.household = vec![0.0, 1.0, 0.0];
        // Firm 1 sells exactly one unit of money worth.
        let mut out = PeriodOutcome {
            price: vec![1.0; 3],
            sold_qty: vec![0.0, 1.0, 0.0],
            fill_ratio: vec![1.0; 3],
            ..Default::default()
        };
        let up = update_wealth(&s, &out);
        assert!((up.wealth[1] - 0.95).abs() < 1e-15);
        assert!((up.wealth[0] - 0.05).abs() < 1e-15);
        assert!((up.dividends[1] - 0.05).abs() < 1e-15);

        s.loans[1] = 0.03;
        let up = update_wealth(&s, &out);
        assert!(up.loans[1].abs() < 1e-15);
        assert!((up.dividends[1] - 0.02).abs() < 1e-15);
        assert!((up.wealth[0] - 0.05).abs() < 1e-15);

        out.sold_qty[0] = 0.5;
        let up = update_wealth(&s, &out);
        assert!((up.wealth[0] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn optimal_shares_reached_with_full_speed() {
        let params = ModelParams {
            tau_w: 1.0,
            m: 30,
            ..Default::default()
        };
        let mut s = init_economy(&params, &InitSpec::default(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let price: Vec<f64> = (0..=30).map(|_| rng.random_range(0.5..3.0)).collect();
        update_input_shares(&mut s, &price);
        for i in 1..=30 {
            let sp: Vec<f64> = s.network.suppliers(i).iter().map(|&j| price[j]).collect();
            let opt = crate::ces::optimal_input_shares(&sp, 0.25, 0.5).unwrap();
            assert_eq!(s.shares.labor[i], 0.25);
            for (a, b) in s.shares.inputs[i].iter().zip(&opt.inputs) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_speed_keeps_shares() {
        let params = ModelParams {
            tau_w: 0.0,
            m: 30,
            ..Default::default()
        };
        let mut s = init_economy(&params, &InitSpec::default(), 3).unwrap();
        let before = s.shares.clone();
        let price: Vec<f64> = (0..=30).map(|i| 1.0 + i as f64).collect();
        update_input_shares(&mut s, &price);
        assert_eq!(before, s.shares);
    }

    #[test]
    fn step_keeps_state_valid() {
        let params = ModelParams {
            m: 50,
            tau_p: 0.3,
            tau_w: 0.7,
            theta: 0.8,
            ..Default::default()
        };
        let mut s = init_economy(&params, &InitSpec::default(), 8).unwrap();
        for _ in 0..200 {
            step_period(&mut s).unwrap();
            let v = validate_state(&s);
            assert!(v.is_empty(), "{v:?}");
        }
        assert_eq!(s.t, 200);
    }

    #[test]
    fn relative_prices_are_bounded() {
        assert_eq!(RELATIVE_PRICE_BOUND, 2f64.powi(300));
        let params = ModelParams { m: 10, ..Default::default() };
        let mut s = init_economy(&params, &InitSpec::default(), 1).unwrap();
        s.stock[3] = 0.0;
        s.price[3] = s.price[0] * 2f64.powi(299);
        s.price[5] = s.price[0] * 2f64.powi(-299);
        let d = nominal_demands(&s);
        let (_, posted) = update_prices(&s, &d);
        assert_eq!(posted[3], posted[0] * RELATIVE_PRICE_BOUND);
        assert!(posted[5] >= posted[0] / RELATIVE_PRICE_BOUND);
        for _ in 0..500 {
            s.stock[3] = 0.0;
            step_period(&mut s).unwrap();
            assert!(s.price[3].is_finite() && s.price[3] <= s.price[0] * RELATIVE_PRICE_BOUND);
        }
    }

    #[test]
    fn instant_price_adjustment_clears_markets() {
        let params = ModelParams {
            m: 40,
            tau_p: 1.0,
            tau_w: 0.5,
            ..Default::default()
        };
        let mut s = init_economy(&params, &InitSpec::default(), 2).unwrap();
        for _ in 0..100 {
            let stock = s.stock.clone();
            let out = step_period(&mut s).unwrap();
            for &i in s.network.active_ids() {
                assert!((out.sold_qty[i] - stock[i]).abs() <= 1e-12 * stock[i]);
                // inventories after the sale are empty: next stock is pure production
                assert!((s.stock[i] - out.production[i]).abs() <= 1e-12 * s.stock[i].max(1e-300));
            }
            assert!(out.diagnostics.unmet_demand < 1e-12);
        }
    }

    #[test]
    fn conserve_money_mode_conserves() {
        let params = ModelParams {
            m: 40,
            tau_p: 0.05,
            tau_w: 0.9,
            theta: 0.9,
            conserve_money: true,
            ..Default::default()
        };
        let mut s = init_economy(&params, &InitSpec::default(), 2).unwrap();
        let mut rationed = false;
        for _ in 0..300 {
            let before = s.total_money();
            let out = step_period(&mut s).unwrap();
            rationed |= out.fill_ratio.iter().any(|f| *f < 1.0);
            assert!((s.total_money() - before).abs() <= 1e-9 * before);
            let ids = s.network.active_ids();
            let demand: f64 = ids.iter().map(|&i| out.nominal_demand[i]).sum();
            let unmet: f64 = ids.iter().map(|&i| out.nominal_demand[i] * (1.0 - out.fill_ratio[i])).sum();
            assert!((out.diagnostics.unmet_demand - unmet / demand).abs() < 1e-12);
        }
        assert!(rationed, "test setup should exercise rationing");
    }

    #[test]
    fn single_firm_pair_reaches_fixed_point() {
        // Two firms supplying each other; a symmetric economy has a closed
        // form fixed point: with wage w, p = w^alpha p^(1-alpha) kappa / (1 - lambda)
        // gives p / w = (kappa / (1 - lambda))^(1 / alpha).
        let params = ModelParams {
            alpha: 0.5,
            theta: 0.5,
            tau_p: 0.5,
            tau_w: 0.5,
            lambda: 0.05,
            ..Default::default()
        };
        let mut s = toy(
            params,
            vec![vec![], vec![2], vec![1]],
            vec![1.0 / 3.0; 3],
            vec![1.0; 3],
            vec![0.0, 0.3, 0.3],
        );
        for _ in 0..5000 {
            step_period(&mut s).unwrap();
        }
        let kappa: f64 = 0.5f64.powf(-0.5) * 0.5f64.powf(-0.5);
        let expect = (kappa / 0.95).powf(1.0 / 0.5);
        let rel = s.price[1] / s.price[0];
        assert!((rel - expect).abs() < 1e-10 * expect, "{rel} vs {expect}");
    }

    #[test]
    fn nominal_rescaling_leaves_trajectory_unchanged() {
        let params = ModelParams {
            m: 40,
            theta: 0.8,
            tau_p: 0.9,
            tau_w: 0.9,
            ..Default::default()
        };
        let mut a = init_economy(&params, &InitSpec::default(), 11).unwrap();
        let mut b = a.clone();
        let f = 2f64.powi(300);
        for v in b.price.iter_mut().chain(b.wealth.iter_mut()) {
            *v *= f;
        }
        b.nominal_exponent = -300;
        for _ in 0..300 {
            step_period(&mut a).unwrap();
            step_period(&mut b).unwrap();
        }
        assert_ne!(b.nominal_exponent, -300);
        assert_eq!(a.stock, b.stock);
        assert_eq!(a.shares, b.shares);
        let scale = 2f64.powi(b.nominal_exponent - a.nominal_exponent);
        for i in 0..=40 {
            assert_eq!(a.price[i], b.price[i] * scale);
            assert_eq!(a.wealth[i], b.wealth[i] * scale);
        }
        assert!((a.log_wage() - b.log_wage()).abs() < 1e-9);
    }
}
