//! Runs one simulation and collects its artifacts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::evolution::evolve_network;
use crate::market::{step_period_with, PeriodWorkspace};
use crate::state::{init_economy, stream_rng, validate_state, EconomyState};
use crate::stats::AgeCensus;

use super::config::ExperimentConfig;

/// RNG stream used by the network evolution; initialization uses stream 0.
const EVOLUTION_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub t: u64,
    pub inflation: f64,
    pub excess_supply: f64,
    pub unmet_demand: f64,
    pub total_production: f64,
    pub avg_profit: f64,
    /// Natural log of the wage in initial-state units.
    pub log_wage: f64,
    pub rewire_attempts: usize,
    pub rewires: usize,
    pub exits: usize,
    pub entries: usize,
    pub active_firms: usize,
}

/// One firm at a snapshot. Money amounts are in units of the current wage;
/// `sales` is the revenue accumulated since the previous snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub id: usize,
    pub in_degree: usize,
    pub out_degree: usize,
    pub price: f64,
    pub wealth: f64,
    pub stock: f64,
    pub sales: f64,
    pub age: u64,
    pub birth: u64,
    /// Sum of the input shares clients spend on this firm.
    pub in_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: u64,
    pub firms: Vec<FirmRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentArtifacts {
    pub config: ExperimentConfig,
    pub timeseries: Vec<TimeSeriesRow>,
    pub snapshots: Vec<Snapshot>,
    pub events: EventLog,
    /// Firm-periods by age after the burn-in.
    pub census: AgeCensus,
    /// Event periods `[start, end)` covered by the census.
    pub census_window: (u64, u64),
    pub final_state: EconomyState,
}

impl ExperimentArtifacts {
    /// In-degree histogram of the final network: `(in_degree, firms)`.
    pub fn final_degree_distribution(&self) -> Vec<(usize, usize)> {
        degree_distribution(&self.final_state)
    }

    /// Rows after the burn-in.
    pub fn measured_timeseries(&self) -> &[TimeSeriesRow] {
        let start = self.timeseries.partition_point(|r| r.t <= self.config.burn_in);
        &self.timeseries[start..]
    }
}

pub fn degree_distribution(state: &EconomyState) -> Vec<(usize, usize)> {
    let net = &state.network;
    let mut counts = Vec::<usize>::new();
    for &i in net.active_ids() {
        let d = net.in_degree(i);
        if d >= counts.len() {
            counts.resize(d + 1, 0);
        }
        counts[d] += 1;
    }
    counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect()
}

/// Input shares received by each firm from its clients.
pub fn incoming_weights(state: &EconomyState) -> Vec<f64> {
    let net = &state.network;
    let mut w = vec![0.0; state.m() + 1];
    for &h in net.active_ids() {
        for (&j, &a) in net.suppliers(h).iter().zip(&state.shares.inputs[h]) {
            w[j] += a;
        }
    }
    w
}

pub fn firm_records(state: &EconomyState, sales: &[f64]) -> Vec<FirmRecord> {
    let net = &state.network;
    let wage = state.price[0];
    let in_weight = incoming_weights(state);
    net.active_ids()
        .iter()
        .map(|&i| FirmRecord {
            id: i,
            in_degree: net.in_degree(i),
            out_degree: net.out_degree(i),
            price: state.price[i] / wage,
            wealth: state.wealth[i] / wage,
            stock: state.stock[i],
            sales: sales[i],
            age: state.age(i),
            birth: state.birth[i],
            in_weight: in_weight[i],
        })
        .collect()
}

/// Simulates `config.horizon` periods: each period runs the market step
/// and then the network evolution.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentArtifacts> {
    config.validate()?;
    let mut state = init_economy(&config.params, &config.init, config.seed)?;
    let mut rng = stream_rng(config.seed, EVOLUTION_STREAM);
    let mut log = EventLog::new(config.record_rewires);
    let mut ws = PeriodWorkspace::default();
    let m = state.m();
    let mut sales = vec![0.0; m + 1];
    let mut timeseries = Vec::with_capacity(config.horizon as usize);
    let mut snapshots = Vec::new();
    let mut census = AgeCensus::default();
    let start_t = state.t;

    for _ in 0..config.horizon {
        step_period_with(&mut state, &mut ws)?;
        let out = &ws.outcome;
        let wage = out.price[0];
        for &i in state.network.active_ids() {
            sales[i] += out.revenue(i) / wage;
        }
        let elapsed = state.t - start_t;
        if elapsed > config.burn_in {
            for &i in state.network.active_ids() {
                census.record(state.age(i));
            }
        }
        let (n_exits, n_entries) = (log.exits.len(), log.entries.len());
        let counts = evolve_network(&mut state, &mut rng, &mut log);
        for e in &log.exits[n_exits..] {
            sales[e.firm] = 0.0;
        }
        for e in &log.entries[n_entries..] {
            sales[e.firm] = 0.0;
        }
        let d = &ws.outcome.diagnostics;
        timeseries.push(TimeSeriesRow {
            t: state.t,
            inflation: d.inflation,
            excess_supply: d.excess_supply,
            unmet_demand: d.unmet_demand,
            total_production: d.total_production,
            avg_profit: d.avg_profit,
            log_wage: state.log_wage(),
            rewire_attempts: counts.rewires_attempted,
            rewires: counts.rewires_accepted,
            exits: counts.exits,
            entries: counts.entries,
            active_firms: state.network.active_count(),
        });
        if config.check_every > 0 && elapsed % config.check_every == 0 {
            let v = validate_state(&state);
            if !v.is_empty() {
                return Err(Error::Invariant {
                    period: state.t,
                    details: v.join("; "),
                });
            }
        }
        if config.snapshots && elapsed >= config.burn_in && elapsed % config.stride == 0 {
            snapshots.push(Snapshot {
                t: state.t,
                firms: firm_records(&state, &sales),
            });
        }
        if elapsed % config.stride == 0 {
            sales.iter_mut().for_each(|s| *s = 0.0);
        }
    }

    Ok(ExperimentArtifacts {
        config: config.clone(),
        timeseries,
        snapshots,
        events: log,
        census,
        census_window: (start_t + config.burn_in + 1, start_t + config.horizon + 1),
        final_state: state,
    })
}
