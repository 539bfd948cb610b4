//! Configuration, simulation runs, regime classification, parameter
//! sweeps and artifact files.

pub mod analysis;
pub mod artifacts;
pub mod config;
pub mod phase;
pub mod run;
pub mod sweep;

pub use artifacts::{load_run, write_fits, write_phase_grid, write_run, StoredRun};
pub use analysis::{analyze, exit_options, FitOutcome, FitsReport, GrowthReport};
pub use config::{AnalysisOptions, ExperimentConfig, SweepGrid};
pub use phase::{classify_phase, PhaseLabel, PhaseResult, PhaseThresholds};
pub use run::{degree_distribution, firm_records, incoming_weights, run_experiment, ExperimentArtifacts, FirmRecord, Snapshot, TimeSeriesRow};
pub use sweep::{sweep_phase_diagram, sweep_phase_diagram_with, SweepPoint, WORKERS_ENV};
