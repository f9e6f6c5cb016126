//! Closed-loop simulation: Poisson demand, a controller in the loop,
//! per-request wait accounting, summary metrics and CSV/JSON export.

mod demand;
mod export;
mod metrics;
mod run;

use thiserror::Error;

pub use demand::{generate_arrivals, ingest_trip_records, ingest_trip_records_file, RatePiece, RateSchedule};
pub use export::{
    write_charge_csv, write_metrics_json, write_requests_csv, write_series_csv, write_station_csv, write_trace_files,
};
pub use metrics::{compute_metrics, peak_and_half_peak_fraction, Metrics};
pub use run::{run_simulation, run_simulation_with, RunOptions, Scenario, StepRecord, Trace};

use crate::dispatch::DispatchError;
use crate::model::{ModelError, Violation};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid rate schedule: {0}")]
    InvalidRates(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("line {line}: {message}")]
    TripRecord { line: u64, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("controller {controller} failed at step {time}: {source}")]
    Controller {
        controller: String,
        time: u64,
        #[source]
        source: DispatchError,
    },
    #[error("controller {controller} emitted an infeasible control at step {time}: {}", join(.violations))]
    InvalidControl {
        controller: String,
        time: u64,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
