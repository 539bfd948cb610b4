//! Checks that a network has the nested, out-degree-ordered structure of a
//! steady state: clients link to higher out-degree firms first.

use serde::{Deserialize, Serialize};

use crate::network::ProductionNetwork;

const MAX_EXAMPLES: usize = 50;

/// In-degree summary for one out-degree class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeClass {
    pub out_degree: usize,
    pub firms: usize,
    pub min_in: usize,
    pub max_in: usize,
    pub mean_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub passed: bool,
    /// Triples `(client, j, i)` with `n_j < n_i`, `client` buying from `j`
    /// but not from `i`.
    pub nested_violations: usize,
    pub nested_examples: Vec<(usize, usize, usize)>,
    /// Pairs `(i, j)` with `n_i > n_j` but `p_i >= p_j`.
    pub price_violations: usize,
    pub price_examples: Vec<(usize, usize)>,
    /// Clients linking to an out-degree class after one they only partly cover.
    pub cluster_violations: usize,
    pub cluster_examples: Vec<usize>,
    /// Mean in-degree is nondecreasing across out-degree classes.
    pub in_degree_monotone: bool,
    pub classes: Vec<DegreeClass>,
}

/// Runs the nested, cluster, price and in-degree checks over active firms.
/// `prices` is indexed by agent id.
pub fn nested_hierarchy_check(network: &ProductionNetwork, prices: &[f64]) -> HierarchyReport {
    let ids = network.active_ids();
    let n = |i: usize| network.out_degree(i);

    // Out-degrees of active firms, sorted, for counting firms above a level.
    let mut sorted: Vec<usize> = ids.iter().map(|&i| n(i)).collect();
    sorted.sort_unstable();
    let above = |k: usize| sorted.len() - sorted.partition_point(|&d| d <= k);

    let mut nested_violations = 0;
    let mut nested_examples = Vec::new();
    for &h in ids {
        let sup = network.suppliers(h);
        for &j in sup {
            let nj = n(j);
            let linked_above = sup.iter().filter(|&&s| n(s) > nj).count();
            let missing = above(nj) - linked_above - usize::from(n(h) > nj);
            nested_violations += missing;
            if missing > 0 && nested_examples.len() < MAX_EXAMPLES {
                for &i in ids {
                    if i != h && n(i) > nj && !sup.contains(&i) && nested_examples.len() < MAX_EXAMPLES {
                        nested_examples.push((h, j, i));
                    }
                }
            }
        }
    }

    // Classes in decreasing out-degree.
    let mut levels: Vec<usize> = sorted.clone();
    levels.dedup();
    levels.reverse();
    let class_of = |k: usize| levels.binary_search_by(|l| k.cmp(l)).expect("known level");
    let mut class_size = vec![0usize; levels.len()];
    for &i in ids {
        class_size[class_of(n(i))] += 1;
    }
    let mut cluster_violations = 0;
    let mut cluster_examples = Vec::new();
    let mut links = vec![0usize; levels.len()];
    for &h in ids {
        links.iter_mut().for_each(|x| *x = 0);
        for &j in network.suppliers(h) {
            links[class_of(n(j))] += 1;
        }
        let own = class_of(n(h));
        let full = |c: usize| links[c] == class_size[c] - usize::from(c == own);
        let first_partial = (0..levels.len()).find(|&c| !full(c));
        let bad = match first_partial {
            Some(c) => links[c + 1..].iter().any(|&x| x > 0),
            None => false,
        };
        if bad {
            cluster_violations += 1;
            if cluster_examples.len() < MAX_EXAMPLES {
                cluster_examples.push(h);
            }
        }
    }

    // Price ordering: ascending out-degree, compare each class with all lower ones.
    let mut by_degree: Vec<usize> = ids.to_vec();
    by_degree.sort_by_key(|&i| n(i));
    let mut lower_prices: Vec<f64> = Vec::new();
    let mut price_violations = 0;
    let mut price_examples = Vec::new();
    let mut start = 0;
    while start < by_degree.len() {
        let k = n(by_degree[start]);
        let end = start + by_degree[start..].iter().take_while(|&&i| n(i) == k).count();
        for &i in &by_degree[start..end] {
            let cheaper_or_equal = lower_prices.partition_point(|&p| p <= prices[i]);
            price_violations += cheaper_or_equal;
            if cheaper_or_equal > 0 && price_examples.len() < MAX_EXAMPLES {
                for &j in &by_degree[..start] {
                    if prices[j] <= prices[i] && price_examples.len() < MAX_EXAMPLES {
                        price_examples.push((i, j));
                    }
                }
            }
        }
        for &i in &by_degree[start..end] {
            let pos = lower_prices.partition_point(|&p| p < prices[i]);
            lower_prices.insert(pos, prices[i]);
        }
        start = end;
    }

    let mut classes: Vec<DegreeClass> = Vec::new();
    for &i in &by_degree {
        let d = network.in_degree(i);
        match classes.last_mut() {
            Some(c) if c.out_degree == n(i) => {
                c.firms += 1;
                c.min_in = c.min_in.min(d);
                c.max_in = c.max_in.max(d);
                c.mean_in += d as f64;
            }
            _ => classes.push(DegreeClass {
                out_degree: n(i),
                firms: 1,
                min_in: d,
                max_in: d,
                mean_in: d as f64,
            }),
        }
    }
    for c in &mut classes {
        c.mean_in /= c.firms as f64;
    }
    let in_degree_monotone = classes.windows(2).all(|w| w[1].mean_in >= w[0].mean_in);

    HierarchyReport {
        passed: nested_violations == 0 && cluster_violations == 0 && price_violations == 0,
        nested_violations,
        nested_examples,
        price_violations,
        price_examples,
        cluster_violations,
        cluster_examples,
        in_degree_monotone,
        classes,
    }
}
