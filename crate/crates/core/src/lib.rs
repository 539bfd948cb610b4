//! Out-of-equilibrium production-network economy.
//!
//! Firms buy labor and intermediate goods from their suppliers with a CES
//! technology, post prices that adjust towards market clearing, and rewire,
//! exit and enter over time.

pub mod ces;
pub mod equilibrium;
pub mod error;
pub mod events;
pub mod experiment;
pub mod evolution;
pub mod market;
pub mod master_eq;
pub mod network;
pub mod params;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
pub use network::ProductionNetwork;
pub use params::{ModelParams, ProductionInputs};
pub use state::{init_economy, validate_state, EconomyState, InitSpec, OutDegreeLaw, SpendingShares};
