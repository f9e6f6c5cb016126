use serde::{Deserialize, Serialize};

use super::charge::Charge;
use super::network::{Network, Station};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VehicleStatus {
    Waiting { station: Station },
    /// `remaining == 0` means the vehicle arrived this step and may act.
    EnRoute { dest: Station, remaining: u32 },
}

impl VehicleStatus {
    /// Station the vehicle can depart from this step, if any.
    pub fn available_at(self) -> Option<Station> {
        match self {
            VehicleStatus::Waiting { station } => Some(station),
            VehicleStatus::EnRoute { dest, remaining: 0 } => Some(dest),
            VehicleStatus::EnRoute { .. } => None,
        }
    }

    /// Station the vehicle is at or heading to.
    pub fn station(self) -> Station {
        match self {
            VehicleStatus::Waiting { station } => station,
            VehicleStatus::EnRoute { dest, .. } => dest,
        }
    }

    pub fn is_waiting(self) -> bool {
        matches!(self, VehicleStatus::Waiting { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargeParams {
    pub alpha_c: Charge,
    pub alpha_d: Charge,
}

impl ChargeParams {
    pub fn new(alpha_c: f64, alpha_d: f64) -> Result<Self, ModelError> {
        let params = ChargeParams {
            alpha_c: Charge::from_f64(alpha_c),
            alpha_d: Charge::from_f64(alpha_d),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, rate) in [("alpha_c", self.alpha_c), ("alpha_d", self.alpha_d)] {
            if rate <= Charge::ZERO || rate > Charge::FULL {
                return Err(ModelError::InvalidChargeParams(format!("{name} = {rate} is outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Charge consumed by a trip of `travel_time` steps.
    pub fn trip_cost(&self, travel_time: u32) -> Charge {
        self.alpha_d * travel_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState {
    pub time: u64,
    /// `demand[i][j]`: customers waiting at `i` for `j`.
    pub demand: Vec<Vec<i64>>,
    pub vehicles: Vec<VehicleStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<Charge>>,
}

impl SystemState {
    pub fn empty(n: usize, vehicles: Vec<VehicleStatus>) -> Self {
        SystemState {
            time: 0,
            demand: vec![vec![0; n]; n],
            vehicles,
            charges: None,
        }
    }

    /// `m` vehicles waiting, spread round-robin over the stations.
    pub fn round_robin(n: usize, m: usize) -> Self {
        let vehicles = (0..m).map(|k| VehicleStatus::Waiting { station: k % n }).collect();
        SystemState::empty(n, vehicles)
    }

    pub fn with_charges(mut self, charge: Charge) -> Self {
        self.charges = Some(vec![charge; self.vehicles.len()]);
        self
    }

    pub fn n_stations(&self) -> usize {
        self.demand.len()
    }

    pub fn fleet_size(&self) -> usize {
        self.vehicles.len()
    }

    pub fn total_waiting(&self) -> i64 {
        self.demand.iter().flatten().sum()
    }

    pub fn waiting_at(&self, station: Station) -> i64 {
        self.demand[station].iter().sum()
    }

    pub fn mean_charge(&self) -> Option<f64> {
        let charges = self.charges.as_ref()?;
        if charges.is_empty() {
            return Some(0.0);
        }
        Some(charges.iter().map(|c| c.micros() as f64).sum::<f64>() / (charges.len() as f64 * Charge::SCALE as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum VehicleAction {
    Hold,
    Pickup { from: Station, to: Station },
    Rebalance { from: Station, to: Station },
}

impl VehicleAction {
    pub fn trip(self) -> Option<(Station, Station)> {
        match self {
            VehicleAction::Hold => None,
            VehicleAction::Pickup { from, to } | VehicleAction::Rebalance { from, to } => Some((from, to)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub time: u64,
    pub actions: Vec<VehicleAction>,
}

impl Control {
    pub fn hold_all(time: u64, m: usize) -> Self {
        Control {
            time,
            actions: vec![VehicleAction::Hold; m],
        }
    }

    pub fn is_all_hold(&self) -> bool {
        self.actions.iter().all(|a| *a == VehicleAction::Hold)
    }

    pub fn pickups(&self, from: Station, to: Station) -> usize {
        self.actions
            .iter()
            .filter(|a| **a == VehicleAction::Pickup { from, to })
            .count()
    }
}

/// Customers appearing at each origin for each destination during one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalBatch {
    pub time: u64,
    pub counts: Vec<Vec<u32>>,
}

impl ArrivalBatch {
    pub fn zero(n: usize, time: u64) -> Self {
        ArrivalBatch {
            time,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().map(|&c| c as u64).sum()
    }
}

/// Vehicles allowed to wait at each station.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationCapacity {
    pub per_station: Vec<u32>,
}

impl StationCapacity {
    pub fn new(per_station: Vec<u32>) -> Self {
        StationCapacity { per_station }
    }

    /// Every vehicle needs somewhere to wait.
    pub fn check_fleet(&self, fleet: usize) -> Result<(), ModelError> {
        let total: u64 = self.per_station.iter().map(|&h| h as u64).sum();
        if total < fleet as u64 {
            return Err(ModelError::InvalidCapacity(format!(
                "{total} parking spots for {fleet} vehicles"
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_dimensions(state: &SystemState, net: &Network) -> Result<(), ModelError> {
    let n = net.n_stations();
    if state.demand.len() != n || state.demand.iter().any(|r| r.len() != n) {
        return Err(ModelError::DimensionMismatch(format!(
            "demand matrix is not {n}x{n}"
        )));
    }
    for (k, v) in state.vehicles.iter().enumerate() {
        if v.station() >= n {
            return Err(ModelError::DimensionMismatch(format!(
                "vehicle {k} refers to station {} of {n}",
                v.station()
            )));
        }
    }
    if let Some(charges) = &state.charges {
        if charges.len() != state.vehicles.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} charges for {} vehicles",
                charges.len(),
                state.vehicles.len()
            )));
        }
    }
    Ok(())
}
