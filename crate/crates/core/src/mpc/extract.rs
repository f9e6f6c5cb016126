use amod_milp::Solution;

use super::builder::Formulation;
use super::index::VarKey;
use super::MpcError;
use crate::model::{Control, VehicleAction};

/// Binary values closer than this to 0 or 1 are read as that integer.
pub const VALUE_TOL: f64 = 1e-6;

fn value(solution: &Solution, formulation: &Formulation, key: VarKey) -> Result<f64, MpcError> {
    let id = formulation
        .index
        .get(&key)
        .ok_or_else(|| MpcError::MissingValue(key.to_string()))?;
    solution.value(id).ok_or_else(|| MpcError::MissingValue(key.to_string()))
}

fn binary(solution: &Solution, formulation: &Formulation, key: VarKey) -> Result<bool, MpcError> {
    let v = value(solution, formulation, key)?;
    if v.abs() <= VALUE_TOL {
        Ok(false)
    } else if (v - 1.0).abs() <= VALUE_TOL {
        Ok(true)
    } else {
        Err(MpcError::FractionalValue {
            name: key.to_string(),
            value: v,
        })
    }
}

/// Actions of every vehicle at horizon offset `step`, stamped with `time`.
pub fn extract_control_at(
    solution: &Solution,
    formulation: &Formulation,
    step: u32,
    time: u64,
) -> Result<Control, MpcError> {
    if step >= formulation.horizon {
        return Err(MpcError::Config(format!(
            "step {step} is outside a horizon of {}",
            formulation.horizon
        )));
    }
    let n = formulation.n_stations;
    let m = formulation.fleet_size;
    let mut actions = Vec::with_capacity(m);
    for vehicle in 0..m {
        let mut chosen = VehicleAction::Hold;
        let mut count = 0;
        for from in 0..n {
            for to in (0..n).filter(|&to| to != from) {
                if binary(solution, formulation, VarKey::Pickup { vehicle, from, to, step })? {
                    chosen = VehicleAction::Pickup { from, to };
                    count += 1;
                }
                if binary(solution, formulation, VarKey::Rebalance { vehicle, from, to, step })? {
                    chosen = VehicleAction::Rebalance { from, to };
                    count += 1;
                }
            }
        }
        if count > 1 {
            return Err(MpcError::ConflictingActions { vehicle, step, count });
        }
        actions.push(chosen);
    }
    Ok(Control { time, actions })
}

/// The control applied by the receding-horizon loop.
pub fn extract_first_control(
    solution: &Solution,
    formulation: &Formulation,
    time: u64,
) -> Result<Control, MpcError> {
    extract_control_at(solution, formulation, 0, time)
}

/// Planned state at horizon offset `step` (1..=H), as raw solver values.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedState {
    pub step: u32,
    pub demand: Vec<Vec<f64>>,
    /// `waiting[k][i]`
    pub waiting: Vec<Vec<f64>>,
    /// `traveling[k][i][r]`, indexed by remaining steps.
    pub traveling: Vec<Vec<Vec<f64>>>,
    pub charges: Option<Vec<f64>>,
}

pub fn decode_state(solution: &Solution, formulation: &Formulation, step: u32) -> Result<PlannedState, MpcError> {
    if step == 0 || step > formulation.horizon {
        return Err(MpcError::Config(format!(
            "planned states exist for steps 1..={}, not {step}",
            formulation.horizon
        )));
    }
    let n = formulation.n_stations;
    let m = formulation.fleet_size;
    let mut demand = vec![vec![0.0; n]; n];
    for (from, row) in demand.iter_mut().enumerate() {
        for (to, d) in row.iter_mut().enumerate().filter(|(to, _)| *to != from) {
            *d = value(solution, formulation, VarKey::Demand { from, to, step })?;
        }
    }
    let mut waiting = vec![vec![0.0; n]; m];
    let mut traveling = Vec::with_capacity(m);
    for (vehicle, row) in waiting.iter_mut().enumerate() {
        let mut per_dest = Vec::with_capacity(n);
        for (station, u) in row.iter_mut().enumerate() {
            *u = value(solution, formulation, VarKey::Waiting { vehicle, station, step })?;
            let mut counters = Vec::new();
            let mut remaining = 0;
            while let Some(id) = formulation.index.get(&VarKey::Traveling { vehicle, dest: station, remaining, step }) {
                counters.push(solution.value(id).ok_or_else(|| MpcError::MissingValue(format!("p[{vehicle}]")))?);
                remaining += 1;
            }
            per_dest.push(counters);
        }
        traveling.push(per_dest);
    }
    let charges = if formulation.index.get(&VarKey::Charge { vehicle: 0, step }).is_some() {
        Some(
            (0..m)
                .map(|vehicle| value(solution, formulation, VarKey::Charge { vehicle, step }))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    Ok(PlannedState {
        step,
        demand,
        waiting,
        traveling,
        charges,
    })
}
