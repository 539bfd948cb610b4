//! Supplier switching, exit of firms without clients, and entry.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::events::{EntryEvent, EventLog, ExitEvent, PeriodEvents, RewireEvent};
use crate::state::EconomyState;

/// Redraws of a zero out-degree before an entry is given up.
const MAX_DEGREE_REDRAWS: usize = 1000;

/// Gives the link at `position` the mean of the other intermediate shares
/// (its own share if it is the only one), then rescales the block so that
/// the column sums to one.
pub(crate) fn transfer_weight(inputs: &mut [f64], position: usize, labor: f64) {
    let n = inputs.len();
    if n > 1 {
        let others: f64 = inputs.iter().sum::<f64>() - inputs[position];
        inputs[position] = others / (n - 1) as f64;
    }
    let total: f64 = inputs.iter().sum();
    if total > 0.0 {
        let scale = (1.0 - labor) / total;
        inputs.iter_mut().for_each(|x| *x *= scale);
    } else {
        inputs.iter_mut().for_each(|x| *x = (1.0 - labor) / n as f64);
    }
}

/// `buyer` considers replacing a random supplier by a random active firm it
/// does not buy from, and switches if the newcomer is strictly cheaper.
///
/// Returns `None` when the buyer has no supplier or no eligible challenger.
pub fn attempt_rewire<R: Rng + ?Sized>(state: &mut EconomyState, buyer: usize, rng: &mut R) -> Option<RewireEvent> {
    let net = &state.network;
    let k = net.out_degree(buyer);
    if !net.is_active(buyer) || k == 0 {
        return None;
    }
    let active = net.active_ids();
    let eligible = active.len().saturating_sub(k + 1);
    if eligible == 0 {
        return None;
    }
    let position = rng.random_range(0..k);
    let incumbent = net.suppliers(buyer)[position];
    let is_candidate = |j: usize| j != buyer && !net.has_supplier(buyer, j);
    let challenger = if 2 * eligible >= active.len() {
        loop {
            let j = active[rng.random_range(0..active.len())];
            if is_candidate(j) {
                break j;
            }
        }
    } else {
        let pool: Vec<usize> = active.iter().copied().filter(|&j| is_candidate(j)).collect();
        pool[rng.random_range(0..pool.len())]
    };

    let accepted = state.price[challenger] < state.price[incumbent];
    if accepted {
        state.network.swap_supplier(buyer, position, challenger);
        let labor = state.shares.labor[buyer];
        transfer_weight(&mut state.shares.inputs[buyer], position, labor);
    }
    Some(RewireEvent {
        t: state.t,
        buyer,
        incumbent,
        challenger,
        accepted,
    })
}

fn exit_firm(state: &mut EconomyState, firm: usize) -> ExitEvent {
    let out_degree = state.network.out_degree(firm);
    state.network.deactivate(firm);
    let wealth = std::mem::take(&mut state.wealth[firm]);
    state.wealth[0] += wealth;
    let unpaid_loan = std::mem::take(&mut state.loans[firm]);
    state.stock[firm] = 0.0;
    state.shares.labor[firm] = 0.0;
    state.shares.inputs[firm].clear();
    state.exited_degrees.record(out_degree);
    ExitEvent {
        t: state.t,
        firm,
        birth: state.birth[firm],
        age: state.age(firm),
        out_degree,
        wealth,
        unpaid_loan,
    }
}

/// Removes every active firm without firm clients, repeating until none is
/// left, since an exit can leave its suppliers without clients. Firms leave
/// in ascending id order within each round.
pub fn process_exits(state: &mut EconomyState) -> Vec<ExitEvent> {
    let mut out = Vec::new();
    loop {
        let batch: Vec<usize> = state
            .network
            .active_ids()
            .iter()
            .copied()
            .filter(|&i| state.network.in_degree(i) == 0)
            .collect();
        if batch.is_empty() {
            break;
        }
        for firm in batch {
            out.push(exit_firm(state, firm));
        }
    }
    if !out.is_empty() {
        let EconomyState { shares, network, .. } = state;
        shares.reset_household(network);
    }
    out
}

/// Success probability of the entrant out-degree law: the mean exited
/// out-degree over `m`, pushed up when links have been lost since time 0
/// and down when they have been gained.
pub fn entry_link_probability(mean_exited_degree: f64, m: usize, initial_links: usize, links: usize) -> f64 {
    if links == 0 {
        return 1.0;
    }
    let l0 = initial_links as f64;
    let lt = links as f64;
    let p = mean_exited_degree / m as f64 * (1.0 + 10.0 * (l0 - lt) / lt);
    p.clamp(0.0, 1.0)
}

/// Each inactive slot enters with probability `p_new`.
///
/// An entrant draws its suppliers uniformly among active firms, starts at the
/// average active price with the average active firm wealth borrowed from the
/// household, and wins each active firm as a client with probability
/// `mean_clients_at_t0 / m`; a won client drops one random supplier for it.
/// Entry is abandoned when no client is won.
pub fn process_entries<R: Rng + ?Sized>(state: &mut EconomyState, rng: &mut R) -> Vec<EntryEvent> {
    let p_new = state.params.p_new;
    let m = state.m();
    let mut out = Vec::new();
    if p_new <= 0.0 || state.network.active_count() == 0 {
        return out;
    }
    let n_active = state.network.active_count() as f64;
    let avg_price = state.network.active_ids().iter().map(|&i| state.price[i]).sum::<f64>() / n_active;
    let avg_wealth = state.network.active_ids().iter().map(|&i| state.wealth[i]).sum::<f64>() / n_active;
    let client_p = (state.network.mean_clients_at_t0() / m as f64).clamp(0.0, 1.0);
    let alpha = state.params.alpha;

    for slot in 1..=m {
        if state.network.is_active(slot) || rng.random::<f64>() >= p_new {
            continue;
        }
        let p = entry_link_probability(
            state.mean_exited_out_degree(),
            m,
            state.network.initial_links(),
            state.network.total_links(),
        );
        let Ok(law) = Binomial::new(m as u64, p) else {
            continue;
        };
        let Some(k) = (0..MAX_DEGREE_REDRAWS)
            .map(|_| law.sample(rng) as usize)
            .find(|&k| k > 0)
        else {
            continue;
        };
        let active = state.network.active_ids();
        if k > active.len() {
            continue;
        }
        let suppliers: Vec<usize> = index::sample(rng, active.len(), k).into_iter().map(|x| active[x]).collect();
        let clients: Vec<usize> = active.iter().copied().filter(|_| rng.random::<f64>() < client_p).collect();
        if clients.is_empty() {
            continue;
        }

        state.network.activate(slot, suppliers);
        state.shares.set_uniform_technology(slot, k, alpha);
        state.price[slot] = avg_price;
        state.stock[slot] = 0.0;
        let loan = avg_wealth.min(state.wealth[0]);
        state.wealth[0] -= loan;
        state.wealth[slot] = loan;
        state.loans[slot] = loan;
        state.birth[slot] = state.t;
        for &c in &clients {
            let position = rng.random_range(0..state.network.out_degree(c));
            state.network.swap_supplier(c, position, slot);
            let labor = state.shares.labor[c];
            transfer_weight(&mut state.shares.inputs[c], position, labor);
        }
        out.push(EntryEvent {
            t: state.t,
            firm: slot,
            out_degree: k,
            clients: clients.len(),
            price: avg_price,
            wealth: loan,
        });
    }
    if !out.is_empty() {
        let EconomyState { shares, network, .. } = state;
        shares.reset_household(network);
    }
    out
}

/// One period of network change: rewiring opportunities (firm id order),
/// exits, entries, and exits of firms whose last client switched to an
/// entrant.
pub fn evolve_network<R: Rng + ?Sized>(state: &mut EconomyState, rng: &mut R, log: &mut EventLog) -> PeriodEvents {
    let mut counts = PeriodEvents::default();
    let rho = state.params.rho_chg;
    if rho > 0.0 {
        for idx in 0..state.network.active_count() {
            let buyer = state.network.active_ids()[idx];
            if rng.random::<f64>() < rho {
                if let Some(e) = attempt_rewire(state, buyer, rng) {
                    counts.rewires_attempted += 1;
                    counts.rewires_accepted += usize::from(e.accepted);
                    log.push_rewire(e);
                }
            }
        }
    }
    let mut exits = process_exits(state);
    let entries = process_entries(state, rng);
    if !entries.is_empty() {
        exits.extend(process_exits(state));
    }
    counts.exits = exits.len();
    counts.entries = entries.len();
    exits.into_iter().for_each(|e| log.push_exit(e));
    entries.into_iter().for_each(|e| log.push_entry(e));
    counts
}
