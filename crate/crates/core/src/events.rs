//! Records of network changes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewireEvent {
    pub t: u64,
    pub buyer: usize,
    pub incumbent: usize,
    pub challenger: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub t: u64,
    pub firm: usize,
    pub birth: u64,
    pub age: u64,
    pub out_degree: usize,
    /// Money handed to the household.
    pub wealth: f64,
    /// Entry loan left unpaid.
    pub unpaid_loan: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryEvent {
    pub t: u64,
    pub firm: usize,
    pub out_degree: usize,
    pub clients: usize,
    pub price: f64,
    pub wealth: f64,
}

/// Event counts for one period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodEvents {
    pub rewires_attempted: usize,
    pub rewires_accepted: usize,
    pub exits: usize,
    pub entries: usize,
}

impl std::ops::AddAssign for PeriodEvents {
    fn add_assign(&mut self, o: Self) {
        self.rewires_attempted += o.rewires_attempted;
        self.rewires_accepted += o.rewires_accepted;
        self.exits += o.exits;
        self.entries += o.entries;
    }
}

/// Append-only event history. Rewire records are optional because long runs
/// produce hundreds of millions of them; counts are always kept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub record_rewires: bool,
    pub rewires: Vec<RewireEvent>,
    pub exits: Vec<ExitEvent>,
    pub entries: Vec<EntryEvent>,
    pub totals: PeriodEvents,
}

impl EventLog {
    pub fn new(record_rewires: bool) -> Self {
        Self {
            record_rewires,
            ..Default::default()
        }
    }

    pub fn push_rewire(&mut self, e: RewireEvent) {
        self.totals.rewires_attempted += 1;
        self.totals.rewires_accepted += usize::from(e.accepted);
        if self.record_rewires {
            self.rewires.push(e);
        }
    }

    pub fn push_exit(&mut self, e: ExitEvent) {
        self.totals.exits += 1;
        self.exits.push(e);
    }

    pub fn push_entry(&mut self, e: EntryEvent) {
        self.totals.entries += 1;
        self.entries.push(e);
    }
}
