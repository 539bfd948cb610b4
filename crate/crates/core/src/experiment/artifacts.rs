//! Artifact files of a run or a sweep, and reading them back.
//!
//! A run directory holds `config.toml`, `run.json`, `timeseries.csv`,
//! `firms_<t>.csv` per snapshot, `events.csv`, `degree_dist_<t>.csv` for
//! the final network, `age_census.csv` and `fits.json`. Floats are written
//! in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EntryEvent, EventLog, ExitEvent, PeriodEvents, RewireEvent};
use crate::stats::AgeCensus;

use super::analysis::{analyze, FitsReport};
use super::config::ExperimentConfig;
use super::phase::{PhaseLabel, PhaseResult};
use super::run::{ExperimentArtifacts, FirmRecord, Snapshot, TimeSeriesRow};
use super::sweep::SweepPoint;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "run.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const CENSUS_FILE: &str = "age_census.csv";
pub const FITS_FILE: &str = "fits.json";
pub const PHASE_GRID_FILE: &str = "phase_grid.csv";

/// Bookkeeping that does not fit the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub final_t: u64,
    pub census_window: (u64, u64),
    pub snapshot_times: Vec<u64>,
    pub totals: PeriodEvents,
}

/// One line of `events.csv`; fields not used by a kind are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub kind: String,
    pub t: u64,
    /// Exiting or entering firm, or the buyer of a rewire.
    pub firm: usize,
    pub incumbent: Option<usize>,
    pub challenger: Option<usize>,
    pub accepted: Option<bool>,
    pub birth: Option<u64>,
    pub age: Option<u64>,
    pub out_degree: Option<usize>,
    pub clients: Option<usize>,
    pub price: Option<f64>,
    pub wealth: Option<f64>,
    pub unpaid_loan: Option<f64>,
}

impl EventRow {
    fn empty(kind: &str, t: u64, firm: usize) -> Self {
        Self {
            kind: kind.into(),
            t,
            firm,
            incumbent: None,
            challenger: None,
            accepted: None,
            birth: None,
            age: None,
            out_degree: None,
            clients: None,
            price: None,
            wealth: None,
            unpaid_loan: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DegreeRow {
    in_degree: usize,
    firms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CensusRow {
    age: u64,
    firm_periods: u64,
}

/// One line of `phase_grid.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGridRow {
    pub theta: f64,
    pub tau_p: f64,
    pub tau_w: f64,
    pub p_new: f64,
    pub rho_chg: f64,
    pub label: Option<PhaseLabel>,
    pub convergence_score: Option<f64>,
    pub peak_prominence: Option<f64>,
    pub peak_period: Option<f64>,
    pub inflation_crossings: Option<usize>,
    pub demand_persistence: Option<f64>,
    pub mean_inflation: Option<f64>,
    pub mean_excess_supply: Option<f64>,
    pub mean_unmet_demand: Option<f64>,
    pub error: Option<String>,
}

impl From<&SweepPoint> for PhaseGridRow {
    fn from(p: &SweepPoint) -> Self {
        let r: Option<&PhaseResult> = p.result.as_ref().ok();
        Self {
            theta: p.params.theta,
            tau_p: p.params.tau_p,
            tau_w: p.params.tau_w,
            p_new: p.params.p_new,
            rho_chg: p.params.rho_chg,
            label: r.map(|r| r.label),
            convergence_score: r.map(|r| r.convergence_score),
            peak_prominence: r.map(|r| r.peak_prominence),
            peak_period: r.map(|r| r.peak_period),
            inflation_crossings: r.map(|r| r.inflation_crossings),
            demand_persistence: r.map(|r| r.demand_persistence),
            mean_inflation: r.map(|r| r.mean_inflation),
            mean_excess_supply: r.map(|r| r.mean_excess_supply),
            mean_unmet_demand: r.map(|r| r.mean_unmet_demand),
            error: p.result.as_ref().err().cloned(),
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

pub fn firms_file(t: u64) -> String {
    format!("firms_{t}.csv")
}

pub fn degree_file(t: u64) -> String {
    format!("degree_dist_{t}.csv")
}

/// Flattens an event log into time-ordered rows; within a period rewires
/// come first, then exits, then entries.
pub fn event_rows(log: &EventLog) -> Vec<EventRow> {
    let mut rows: Vec<(u8, EventRow)> = Vec::with_capacity(log.rewires.len() + log.exits.len() + log.entries.len());
    rows.extend(log.rewires.iter().map(|e| {
        let mut r = EventRow::empty("rewire", e.t, e.buyer);
        r.incumbent = Some(e.incumbent);
        r.challenger = Some(e.challenger);
        r.accepted = Some(e.accepted);
        (0, r)
    }));
    rows.extend(log.exits.iter().map(|e| {
        let mut r = EventRow::empty("exit", e.t, e.firm);
        r.birth = Some(e.birth);
        r.age = Some(e.age);
        r.out_degree = Some(e.out_degree);
        r.wealth = Some(e.wealth);
        r.unpaid_loan = Some(e.unpaid_loan);
        (1, r)
    }));
    rows.extend(log.entries.iter().map(|e| {
        let mut r = EventRow::empty("entry", e.t, e.firm);
        r.out_degree = Some(e.out_degree);
        r.clients = Some(e.clients);
        r.price = Some(e.price);
        r.wealth = Some(e.wealth);
        (2, r)
    }));
    rows.sort_by_key(|(k, r)| (r.t, *k));
    rows.into_iter().map(|(_, r)| r).collect()
}

fn missing(row: &EventRow, field: &str) -> Error {
    Error::Config(format!("{} event at t={} lacks `{field}`", row.kind, row.t))
}

/// Rebuilds an event log from rows; counts cover the rows only.
pub fn events_from_rows(rows: &[EventRow]) -> Result<EventLog> {
    let mut log = EventLog::new(rows.iter().any(|r| r.kind == "rewire"));
    for r in rows {
        match r.kind.as_str() {
            "rewire" => log.push_rewire(RewireEvent {
                t: r.t,
                buyer: r.firm,
                incumbent: r.incumbent.ok_or_else(|| missing(r, "incumbent"))?,
                challenger: r.challenger.ok_or_else(|| missing(r, "challenger"))?,
                accepted: r.accepted.ok_or_else(|| missing(r, "accepted"))?,
            }),
            "exit" => log.push_exit(ExitEvent {
                t: r.t,
                firm: r.firm,
                birth: r.birth.ok_or_else(|| missing(r, "birth"))?,
                age: r.age.ok_or_else(|| missing(r, "age"))?,
                out_degree: r.out_degree.ok_or_else(|| missing(r, "out_degree"))?,
                wealth: r.wealth.ok_or_else(|| missing(r, "wealth"))?,
                unpaid_loan: r.unpaid_loan.ok_or_else(|| missing(r, "unpaid_loan"))?,
            }),
            "entry" => log.push_entry(EntryEvent {
                t: r.t,
                firm: r.firm,
                out_degree: r.out_degree.ok_or_else(|| missing(r, "out_degree"))?,
                clients: r.clients.ok_or_else(|| missing(r, "clients"))?,
                price: r.price.ok_or_else(|| missing(r, "price"))?,
                wealth: r.wealth.ok_or_else(|| missing(r, "wealth"))?,
            }),
            other => return Err(Error::Config(format!("unknown event kind `{other}`"))),
        }
    }
    Ok(log)
}

/// Writes every artifact of a run into `dir`, creating it if needed, and
/// returns the paths written.
pub fn write_run(dir: &Path, run: &ExperimentArtifacts, fits: Option<&FitsReport>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut path = |name: String| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    fs::write(path(CONFIG_FILE.into()), run.config.to_toml())?;
    let manifest = RunManifest {
        final_t: run.final_state.t,
        census_window: run.census_window,
        snapshot_times: run.snapshots.iter().map(|s| s.t).collect(),
        totals: run.events.totals,
    };
    fs::write(path(MANIFEST_FILE.into()), serde_json::to_string_pretty(&manifest)?)?;
    write_csv(&path(TIMESERIES_FILE.into()), &run.timeseries)?;
    for s in &run.snapshots {
        write_csv(&path(firms_file(s.t)), &s.firms)?;
    }
    write_csv(&path(EVENTS_FILE.into()), event_rows(&run.events))?;
    let degrees = run
        .final_degree_distribution()
        .into_iter()
        .map(|(in_degree, firms)| DegreeRow { in_degree, firms });
    write_csv(&path(degree_file(run.final_state.t)), degrees)?;
    let census = run
        .census
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(age, &firm_periods)| CensusRow {
            age: age as u64,
            firm_periods,
        });
    write_csv(&path(CENSUS_FILE.into()), census)?;
    if let Some(f) = fits {
        fs::write(path(FITS_FILE.into()), serde_json::to_string_pretty(f)?)?;
    }
    Ok(written)
}

pub fn write_fits(dir: &Path, fits: &FitsReport) -> Result<PathBuf> {
    let p = dir.join(FITS_FILE);
    fs::write(&p, serde_json::to_string_pretty(fits)?)?;
    Ok(p)
}

pub fn write_phase_grid(path: &Path, points: &[SweepPoint]) -> Result<()> {
    write_csv(path, points.iter().map(PhaseGridRow::from))
}

pub fn read_phase_grid(path: &Path) -> Result<Vec<PhaseGridRow>> {
    read_csv(path)
}

/// A run read back from its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRun {
    pub config: ExperimentConfig,
    pub manifest: RunManifest,
    pub timeseries: Vec<TimeSeriesRow>,
    pub snapshots: Vec<Snapshot>,
    pub events: EventLog,
    pub census: AgeCensus,
    /// Final in-degree histogram `(in_degree, firms)`.
    pub degree_distribution: Vec<(usize, usize)>,
}

impl StoredRun {
    pub fn fits(&self) -> FitsReport {
        analyze(
            &self.config,
            &self.snapshots,
            &self.events.exits,
            &self.census,
            self.manifest.census_window,
        )
    }
}

/// Reads a run directory written by [`write_run`].
pub fn load_run(dir: &Path) -> Result<StoredRun> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::InsufficientData(format!(
            "{} holds no run artifacts ({MANIFEST_FILE} missing)",
            dir.display()
        )));
    }
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let config = ExperimentConfig::parse(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    let timeseries = read_csv(&dir.join(TIMESERIES_FILE))?;
    let snapshots = manifest
        .snapshot_times
        .iter()
        .map(|&t| {
            Ok(Snapshot {
                t,
                firms: read_csv::<FirmRecord>(&dir.join(firms_file(t)))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let events = events_from_rows(&read_csv::<EventRow>(&dir.join(EVENTS_FILE))?)?;
    let mut census = AgeCensus::default();
    for row in read_csv::<CensusRow>(&dir.join(CENSUS_FILE))? {
        let a = row.age as usize;
        if a >= census.counts.len() {
            census.counts.resize(a + 1, 0);
        }
        census.counts[a] += row.firm_periods;
    }
    let degree_distribution = read_csv::<DegreeRow>(&dir.join(degree_file(manifest.final_t)))?
        .into_iter()
        .map(|r| (r.in_degree, r.firms))
        .collect();
    Ok(StoredRun {
        config,
        manifest,
        timeseries,
        snapshots,
        events,
        census,
        degree_distribution,
    })
}
