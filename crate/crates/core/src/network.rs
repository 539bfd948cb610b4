//! Directed production network: firm -> ordered list of its suppliers.
//!
//! Firm slots are `1..=m`; slot 0 is the household and never appears in the
//! network. Inactive slots have no suppliers and no clients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionNetwork {
    m: usize,
    active: Vec<bool>,
    /// Sorted list of active firm ids.
    active_ids: Vec<usize>,
    suppliers: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
    total_links: usize,
    initial_links: usize,
    mean_clients_at_t0: f64,
    revision: u64,
}

impl ProductionNetwork {
    /// Builds a network over `m` firm slots; every slot with a supplier list
    /// (even an empty one) in `suppliers[1..]` is active.
    ///
    /// `suppliers` has length `m + 1`; entry 0 is ignored.
    pub fn from_suppliers(m: usize, suppliers: Vec<Vec<usize>>, active: Vec<bool>) -> Self {
        assert_eq!(suppliers.len(), m + 1);
        assert_eq!(active.len(), m + 1);
        let mut in_degree = vec![0; m + 1];
        let mut total = 0;
        for (i, s) in suppliers.iter().enumerate().skip(1) {
            if active[i] {
                for &j in s {
                    in_degree[j] += 1;
                }
                total += s.len();
            }
        }
        let active_ids: Vec<usize> = (1..=m).filter(|&i| active[i]).collect();
        let mean = if active_ids.is_empty() {
            0.0
        } else {
            total as f64 / active_ids.len() as f64
        };
        Self {
            m,
            active,
            active_ids,
            suppliers,
            in_degree,
            total_links: total,
            initial_links: total,
            mean_clients_at_t0: mean,
            revision: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_active(&self, firm: usize) -> bool {
        self.active.get(firm).copied().unwrap_or(false)
    }

    pub fn active_ids(&self) -> &[usize] {
        &self.active_ids
    }

    pub fn active_count(&self) -> usize {
        self.active_ids.len()
    }

    pub fn suppliers(&self, firm: usize) -> &[usize] {
        &self.suppliers[firm]
    }

    pub fn out_degree(&self, firm: usize) -> usize {
        self.suppliers[firm].len()
    }

    /// Number of firm clients.
    pub fn in_degree(&self, firm: usize) -> usize {
        self.in_degree[firm]
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.in_degree
    }

    pub fn total_links(&self) -> usize {
        self.total_links
    }

    pub fn initial_links(&self) -> usize {
        self.initial_links
    }

    pub fn mean_clients_at_t0(&self) -> f64 {
        self.mean_clients_at_t0
    }

    /// Incremented on every structural change.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn has_supplier(&self, firm: usize, supplier: usize) -> bool {
        self.suppliers[firm].contains(&supplier)
    }

    /// Clients of every firm, sorted, indexed by firm id.
    pub fn clients(&self) -> Vec<Vec<usize>> {
        let mut clients = vec![Vec::new(); self.m + 1];
        for &i in &self.active_ids {
            for &j in &self.suppliers[i] {
                clients[j].push(i);
            }
        }
        clients
    }

    /// Replaces the supplier at `position` in `firm`'s list by `new_supplier`.
    pub(crate) fn swap_supplier(&mut self, firm: usize, position: usize, new_supplier: usize) -> usize {
        let old = std::mem::replace(&mut self.suppliers[firm][position], new_supplier);
        self.in_degree[old] -= 1;
        self.in_degree[new_supplier] += 1;
        self.revision += 1;
        old
    }

    /// Deactivates `firm` and removes its supplier links. The firm must have
    /// no clients left.
    pub(crate) fn deactivate(&mut self, firm: usize) -> Vec<usize> {
        debug_assert!(self.active[firm]);
        debug_assert_eq!(self.in_degree[firm], 0);
        let dropped = std::mem::take(&mut self.suppliers[firm]);
        for &j in &dropped {
            self.in_degree[j] -= 1;
        }
        self.total_links -= dropped.len();
        self.active[firm] = false;
        if let Ok(pos) = self.active_ids.binary_search(&firm) {
            self.active_ids.remove(pos);
        }
        self.revision += 1;
        dropped
    }

    /// Activates an empty slot with the given suppliers.
    pub(crate) fn activate(&mut self, firm: usize, suppliers: Vec<usize>) {
        debug_assert!(!self.active[firm]);
        for &j in &suppliers {
            self.in_degree[j] += 1;
        }
        self.total_links += suppliers.len();
        self.suppliers[firm] = suppliers;
        self.active[firm] = true;
        if let Err(pos) = self.active_ids.binary_search(&firm) {
            self.active_ids.insert(pos, firm);
        }
        self.revision += 1;
    }

    /// Structural problems, one message per violation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut in_degree = vec![0usize; self.m + 1];
        let mut total = 0;
        for i in 1..=self.m {
            let s = &self.suppliers[i];
            if !self.active[i] {
                if !s.is_empty() {
                    out.push(format!("inactive firm {i} has suppliers"));
                }
                continue;
            }
            total += s.len();
            for (k, &j) in s.iter().enumerate() {
                if j == i {
                    out.push(format!("firm {i} lists itself as supplier"));
                } else if j == 0 || j > self.m || !self.active[j] {
                    out.push(format!("firm {i} has inactive or invalid supplier {j}"));
                }
                if s[..k].contains(&j) {
                    out.push(format!("firm {i} lists supplier {j} twice"));
                }
                if j <= self.m {
                    in_degree[j] += 1;
                }
            }
        }
        if total != self.total_links {
            out.push(format!(
                "total_links {} differs from sum of out-degrees {total}",
                self.total_links
            ));
        }
        for j in 1..=self.m {
            if in_degree[j] != self.in_degree[j] {
                out.push(format!(
                    "firm {j}: cached in-degree {} differs from actual {}",
                    self.in_degree[j], in_degree[j]
                ));
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn suppliers_mut_unchecked(&mut self, firm: usize) -> &mut Vec<usize> {
        &mut self.suppliers[firm]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(m: usize) -> ProductionNetwork {
        let mut s = vec![Vec::new(); m + 1];
        for i in 1..=m {
            s[i] = vec![i % m + 1];
        }
        let mut active = vec![true; m + 1];
        active[0] = false;
        ProductionNetwork::from_suppliers(m, s, active)
    }

    #[test]
    fn ring_is_consistent() {
        let n = ring(4);
        assert!(n.violations().is_empty());
        assert_eq!(n.total_links(), 4);
        assert_eq!(n.initial_links(), 4);
        assert!((n.mean_clients_at_t0() - 1.0).abs() < 1e-15);
        assert!((1..=4).all(|i| n.in_degree(i) == 1));
    }

    #[test]
    fn swap_keeps_out_degree_and_moves_in_degree() {
        let mut n = ring(4);
        let old = n.swap_supplier(1, 0, 3);
        assert_eq!(old, 2);
        assert_eq!(n.out_degree(1), 1);
        assert_eq!(n.in_degree(2), 0);
        assert_eq!(n.in_degree(3), 2);
        assert_eq!(n.revision(), 1);
        assert!(n.violations().is_empty());
    }

    #[test]
    fn deactivate_then_activate() {
        let mut n = ring(4);
        n.swap_supplier(1, 0, 3);
        let dropped = n.deactivate(2);
        assert_eq!(dropped, vec![3]);
        assert_eq!(n.total_links(), 3);
        assert_eq!(n.active_ids(), &[1, 3, 4]);
        assert!(n.violations().is_empty());
        n.activate(2, vec![4, 1]);
        assert_eq!(n.active_ids(), &[1, 2, 3, 4]);
        assert_eq!(n.total_links(), 5);
        assert!(n.violations().is_empty());
    }

    #[test]
    fn detects_self_loop() {
        let mut n = ring(3);
        n.suppliers_mut_unchecked(2)[0] = 2;
        let v = n.violations();
        assert!(v.iter().any(|s| s.contains("itself")), "{v:?}");
    }
}
