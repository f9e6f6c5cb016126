//! Discrete-time fleet model: stations joined by integer travel times,
//! per-pair customer queues, vehicles that are either waiting or en route,
//! and an optional battery state per vehicle.
//!
//! The dynamics are applied componentwise: queues gain this step's arrivals
//! and lose one customer per pickup, a dispatched vehicle becomes
//! `EnRoute { remaining: travel_time - 1 }`, remaining counters tick down,
//! and an arrived vehicle (`remaining == 0`) that holds becomes `Waiting`.
//! A vehicle charges while waiting after the step and discharges otherwise.

mod charge;
mod cost;
mod dynamics;
mod network;
mod types;

use thiserror::Error;

pub use charge::Charge;
pub use cost::{cost_jc, cost_ju, cost_jx, min_stabilizing_horizon};
pub use dynamics::{step, validate_control, validate_state, Violation};
pub use network::{Network, Station};
pub use types::{
    ArrivalBatch, ChargeParams, Control, StationCapacity, SystemState, VehicleAction, VehicleStatus,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid charge parameters: {0}")]
    InvalidChargeParams(String),
    #[error("invalid station capacity: {0}")]
    InvalidCapacity(String),
    #[error("state has no charges")]
    MissingCharges,
    #[error("state has charges but no charge parameters were given")]
    MissingChargeParams,
    #[error("infeasible state: {}", join(.0))]
    InvalidState(Vec<Violation>),
    #[error("infeasible control: {}", join(.0))]
    InvalidControl(Vec<Violation>),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
