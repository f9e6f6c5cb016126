use std::fmt;

use serde::Serialize;

use super::charge::Charge;
use super::network::{Network, Station};
use super::types::{
    check_dimensions, ArrivalBatch, ChargeParams, Control, StationCapacity, SystemState, VehicleAction,
    VehicleStatus,
};
use super::ModelError;

/// One broken invariant of a state or a control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeDemand { origin: Station, dest: Station, value: i64 },
    DiagonalDemand { station: Station, value: i64 },
    RemainingOutOfRange { vehicle: usize, dest: Station, remaining: u32, max: u32 },
    ChargeOutOfRange { vehicle: usize, charge: Charge },
    ActsWhileTraveling { vehicle: usize },
    WrongOrigin { vehicle: usize, at: Option<Station>, from: Station },
    SelfTrip { vehicle: usize, station: Station },
    StationOutOfRange { vehicle: usize, station: Station },
    TooManyPickups { origin: Station, dest: Station, pickups: usize, available: i64 },
    InsufficientCharge { vehicle: usize, charge: Charge, needed: Charge },
    CapacityExceeded { station: Station, waiting: usize, capacity: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeDemand { origin, dest, value } => {
                write!(f, "demand[{origin}][{dest}] = {value} is negative")
            }
            Violation::DiagonalDemand { station, value } => {
                write!(f, "demand[{station}][{station}] = {value} must be zero")
            }
            Violation::RemainingOutOfRange { vehicle, dest, remaining, max } => write!(
                f,
                "vehicle {vehicle} has {remaining} steps left to station {dest} (max {max})"
            ),
            Violation::ChargeOutOfRange { vehicle, charge } => {
                write!(f, "vehicle {vehicle} charge {charge} is outside [0, 1]")
            }
            Violation::ActsWhileTraveling { vehicle } => {
                write!(f, "vehicle {vehicle} is traveling and can only hold")
            }
            Violation::WrongOrigin { vehicle, at: Some(at), from } => {
                write!(f, "vehicle {vehicle} is at station {at}, not {from}")
            }
            Violation::WrongOrigin { vehicle, at: None, from } => {
                write!(f, "vehicle {vehicle} is not at station {from}")
            }
            Violation::SelfTrip { vehicle, station } => {
                write!(f, "vehicle {vehicle} trip starts and ends at station {station}")
            }
            Violation::StationOutOfRange { vehicle, station } => {
                write!(f, "vehicle {vehicle} action names unknown station {station}")
            }
            Violation::TooManyPickups { origin, dest, pickups, available } => write!(
                f,
                "{pickups} pickups {origin}->{dest} but only {available} customers"
            ),
            Violation::InsufficientCharge { vehicle, charge, needed } => {
                write!(f, "vehicle {vehicle} has charge {charge}, trip needs {needed}")
            }
            Violation::CapacityExceeded { station, waiting, capacity } => {
                write!(f, "{waiting} vehicles would wait at station {station} (capacity {capacity})")
            }
        }
    }
}

/// Every violated state invariant; empty iff the state is feasible.
pub fn validate_state(state: &SystemState, net: &Network) -> Result<Vec<Violation>, ModelError> {
    check_dimensions(state, net)?;
    let mut out = Vec::new();
    for (i, row) in state.demand.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            if i == j {
                if value != 0 {
                    out.push(Violation::DiagonalDemand { station: i, value });
                }
            } else if value < 0 {
                out.push(Violation::NegativeDemand { origin: i, dest: j, value });
            }
        }
    }
    for (k, v) in state.vehicles.iter().enumerate() {
        if let VehicleStatus::EnRoute { dest, remaining } = *v {
            if remaining > net.t_max(dest) {
                out.push(Violation::RemainingOutOfRange {
                    vehicle: k,
                    dest,
                    remaining,
                    max: net.t_max(dest),
                });
            }
        }
    }
    if let Some(charges) = &state.charges {
        for (k, &q) in charges.iter().enumerate() {
            if !q.is_unit_interval() {
                out.push(Violation::ChargeOutOfRange { vehicle: k, charge: q });
            }
        }
    }
    Ok(out)
}

fn check_arrivals(arrivals: &ArrivalBatch, net: &Network) -> Result<(), ModelError> {
    let n = net.n_stations();
    if arrivals.counts.len() != n || arrivals.counts.iter().any(|r| r.len() != n) {
        return Err(ModelError::DimensionMismatch(format!("arrival matrix is not {n}x{n}")));
    }
    if let Some(i) = (0..n).find(|&i| arrivals.counts[i][i] != 0) {
        return Err(ModelError::DimensionMismatch(format!("arrivals[{i}][{i}] must be zero")));
    }
    Ok(())
}

/// Vehicles waiting at each station after `ctrl` is applied.
fn waiting_after(state: &SystemState, ctrl: &Control, n: usize) -> Vec<usize> {
    let mut count = vec![0; n];
    for (v, a) in state.vehicles.iter().zip(&ctrl.actions) {
        if *a == VehicleAction::Hold {
            if let Some(s) = v.available_at() {
                count[s] += 1;
            }
        }
    }
    count
}

/// Every violated control constraint; empty iff `ctrl` is feasible from
/// `state` given this step's `arrivals`.
pub fn validate_control(
    state: &SystemState,
    arrivals: &ArrivalBatch,
    ctrl: &Control,
    net: &Network,
    charge: Option<&ChargeParams>,
    capacity: Option<&StationCapacity>,
) -> Result<Vec<Violation>, ModelError> {
    check_dimensions(state, net)?;
    check_arrivals(arrivals, net)?;
    let n = net.n_stations();
    if ctrl.actions.len() != state.vehicles.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} actions for {} vehicles",
            ctrl.actions.len(),
            state.vehicles.len()
        )));
    }
    if charge.is_some() && state.charges.is_none() {
        return Err(ModelError::MissingCharges);
    }
    if let Some(cap) = capacity {
        if cap.per_station.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "{} capacities for {n} stations",
                cap.per_station.len()
            )));
        }
    }

    let mut out = Vec::new();
    let mut pickups = vec![vec![0usize; n]; n];
    for (k, (v, a)) in state.vehicles.iter().zip(&ctrl.actions).enumerate() {
        let Some((from, to)) = a.trip() else { continue };
        if from >= n || to >= n {
            out.push(Violation::StationOutOfRange {
                vehicle: k,
                station: from.max(to),
            });
            continue;
        }
        if from == to {
            out.push(Violation::SelfTrip { vehicle: k, station: from });
            continue;
        }
        match v.available_at() {
            None => {
                out.push(Violation::ActsWhileTraveling { vehicle: k });
                continue;
            }
            Some(at) if at != from => {
                out.push(Violation::WrongOrigin {
                    vehicle: k,
                    at: Some(at),
                    from,
                });
                continue;
            }
            Some(_) => {}
        }
        if let (Some(cp), Some(charges)) = (charge, &state.charges) {
            let needed = cp.trip_cost(net.travel_time(from, to));
            if charges[k] < needed {
                out.push(Violation::InsufficientCharge {
                    vehicle: k,
                    charge: charges[k],
                    needed,
                });
            }
        }
        if let VehicleAction::Pickup { .. } = a {
            pickups[from][to] += 1;
        }
    }
    for (i, j) in net.pairs() {
        let available = state.demand[i][j] + arrivals.counts[i][j] as i64;
        if pickups[i][j] as i64 > available {
            out.push(Violation::TooManyPickups {
                origin: i,
                dest: j,
                pickups: pickups[i][j],
                available,
            });
        }
    }
    if let Some(cap) = capacity {
        for (i, &waiting) in waiting_after(state, ctrl, n).iter().enumerate() {
            if waiting > cap.per_station[i] as usize {
                out.push(Violation::CapacityExceeded {
                    station: i,
                    waiting,
                    capacity: cap.per_station[i],
                });
            }
        }
    }
    Ok(out)
}

/// Successor state after applying `ctrl` with this step's `arrivals`.
///
/// Both the state and the control are validated first; any violation is
/// returned as an error and nothing is stepped.
pub fn step(
    state: &SystemState,
    ctrl: &Control,
    arrivals: &ArrivalBatch,
    net: &Network,
    charge: Option<&ChargeParams>,
) -> Result<SystemState, ModelError> {
    let violations = validate_state(state, net)?;
    if !violations.is_empty() {
        return Err(ModelError::InvalidState(violations));
    }
    if state.charges.is_some() && charge.is_none() {
        return Err(ModelError::MissingChargeParams);
    }
    let violations = validate_control(state, arrivals, ctrl, net, charge, None)?;
    if !violations.is_empty() {
        return Err(ModelError::InvalidControl(violations));
    }
    Ok(apply(state, ctrl, arrivals, net, charge))
}

/// The dynamics without precondition checks.
pub(crate) fn apply(
    state: &SystemState,
    ctrl: &Control,
    arrivals: &ArrivalBatch,
    net: &Network,
    charge: Option<&ChargeParams>,
) -> SystemState {
    let mut demand = state.demand.clone();
    for (i, row) in demand.iter_mut().enumerate() {
        for (j, d) in row.iter_mut().enumerate() {
            *d += arrivals.counts[i][j] as i64;
        }
    }
    let mut vehicles = Vec::with_capacity(state.vehicles.len());
    for (v, a) in state.vehicles.iter().zip(&ctrl.actions) {
        let next = match (*v, *a) {
            (_, VehicleAction::Pickup { from, to }) => {
                demand[from][to] -= 1;
                VehicleStatus::EnRoute {
                    dest: to,
                    remaining: net.travel_time(from, to) - 1,
                }
            }
            (_, VehicleAction::Rebalance { from, to }) => VehicleStatus::EnRoute {
                dest: to,
                remaining: net.travel_time(from, to) - 1,
            },
            (VehicleStatus::Waiting { station }, VehicleAction::Hold) => VehicleStatus::Waiting { station },
            (VehicleStatus::EnRoute { dest, remaining: 0 }, VehicleAction::Hold) => {
                VehicleStatus::Waiting { station: dest }
            }
            (VehicleStatus::EnRoute { dest, remaining }, VehicleAction::Hold) => VehicleStatus::EnRoute {
                dest,
                remaining: remaining - 1,
            },
        };
        vehicles.push(next);
    }
    let charges = match (&state.charges, charge) {
        (Some(qs), Some(cp)) => Some(
            qs.iter()
                .zip(&vehicles)
                .map(|(&q, v)| {
                    if v.is_waiting() {
                        (q + cp.alpha_c).min(Charge::FULL)
                    } else {
                        q - cp.alpha_d
                    }
                })
                .collect(),
        ),
        (qs, _) => qs.clone(),
    };
    SystemState {
        time: state.time + 1,
        demand,
        vehicles,
        charges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net4() -> Network {
        Network::new(vec![
            vec![0, 4, 2, 3],
            vec![4, 0, 1, 5],
            vec![2, 1, 0, 2],
            vec![3, 5, 2, 0],
        ])
        .unwrap()
    }

    #[test]
    fn canonical_state_is_valid() {
        let s = SystemState::round_robin(4, 3);
        assert!(validate_state(&s, &net4()).unwrap().is_empty());
    }

    #[test]
    fn diagonal_demand_is_one_violation() {
        let mut s = SystemState::round_robin(4, 3);
        s.demand[2][2] = 1;
        assert_eq!(
            validate_state(&s, &net4()).unwrap(),
            vec![Violation::DiagonalDemand { station: 2, value: 1 }]
        );
    }

    #[test]
    fn remaining_beyond_t_max_is_flagged() {
        let net = net4();
        // inbound column for station 3: 3, 5, 2
        let t_max = (0..3).map(|j| net.travel_time(j, 3)).max().unwrap() - 1;
        let mut s = SystemState::round_robin(4, 1);
        s.vehicles[0] = VehicleStatus::EnRoute { dest: 3, remaining: t_max + 1 };
        let v = validate_state(&s, &net).unwrap();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RemainingOutOfRange { remaining: 5, max: 4, .. }));
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let s = SystemState::round_robin(3, 1);
        assert!(matches!(validate_state(&s, &net4()), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn all_hold_is_feasible() {
        let net = net4();
        let mut s = SystemState::round_robin(4, 4);
        s.vehicles[1] = VehicleStatus::EnRoute { dest: 0, remaining: 2 };
        let ctrl = Control::hold_all(0, 4);
        assert!(validate_control(&s, &ArrivalBatch::zero(4, 0), &ctrl, &net, None, None)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn pickups_are_capped_by_waiting_customers() {
        let net = net4();
        let mut s = SystemState::empty(4, vec![VehicleStatus::Waiting { station: 1 }; 2]);
        s.demand[1][2] = 1;
        let pickup = VehicleAction::Pickup { from: 1, to: 2 };
        let ctrl = Control { time: 0, actions: vec![pickup, pickup] };
        let v = validate_control(&s, &ArrivalBatch::zero(4, 0), &ctrl, &net, None, None).unwrap();
        assert_eq!(
            v,
            vec![Violation::TooManyPickups { origin: 1, dest: 2, pickups: 2, available: 1 }]
        );
    }

    #[test]
    fn low_charge_blocks_departure() {
        // trip 1 -> 2 takes 4 steps; 0.3 < 0.1 * 4
        let net = Network::new(vec![vec![0, 4], vec![4, 0]]).unwrap();
        let mut s = SystemState::empty(2, vec![VehicleStatus::Waiting { station: 0 }]).with_charges(Charge::from_f64(0.3));
        s.demand[0][1] = 1;
        let cp = ChargeParams::new(0.2, 0.1).unwrap();
        let ctrl = Control {
            time: 0,
            actions: vec![VehicleAction::Pickup { from: 0, to: 1 }],
        };
        let v = validate_control(&s, &ArrivalBatch::zero(2, 0), &ctrl, &net, Some(&cp), None).unwrap();
        assert_eq!(
            v,
            vec![Violation::InsufficientCharge {
                vehicle: 0,
                charge: Charge::from_f64(0.3),
                needed: Charge::from_f64(0.4)
            }]
        );
    }

    #[test]
    fn traveling_vehicle_cannot_act_and_origin_must_match() {
        let net = net4();
        let mut s = SystemState::round_robin(4, 2);
        s.vehicles[0] = VehicleStatus::EnRoute { dest: 2, remaining: 1 };
        let ctrl = Control {
            time: 0,
            actions: vec![
                VehicleAction::Rebalance { from: 2, to: 3 },
                VehicleAction::Rebalance { from: 0, to: 3 },
            ],
        };
        let v = validate_control(&s, &ArrivalBatch::zero(4, 0), &ctrl, &net, None, None).unwrap();
        assert_eq!(
            v,
            vec![
                Violation::ActsWhileTraveling { vehicle: 0 },
                Violation::WrongOrigin { vehicle: 1, at: Some(1), from: 0 },
            ]
        );
    }

    #[test]
    fn capacity_counts_post_step_waiting() {
        let net = net4();
        let mut s = SystemState::empty(4, vec![VehicleStatus::Waiting { station: 0 }; 2]);
        s.vehicles.push(VehicleStatus::EnRoute { dest: 0, remaining: 0 });
        let cap = StationCapacity::new(vec![2, 1, 1, 1]);
        let hold = Control::hold_all(0, 3);
        let v = validate_control(&s, &ArrivalBatch::zero(4, 0), &hold, &net, None, Some(&cap)).unwrap();
        assert_eq!(v, vec![Violation::CapacityExceeded { station: 0, waiting: 3, capacity: 2 }]);
        let mut leave = hold.clone();
        leave.actions[2] = VehicleAction::Rebalance { from: 0, to: 1 };
        assert!(validate_control(&s, &ArrivalBatch::zero(4, 0), &leave, &net, None, Some(&cap))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn demand_update_adds_arrivals_and_removes_pickups() {
        let net = net4();
        let mut s = SystemState::empty(4, vec![VehicleStatus::Waiting { station: 1 }]);
        s.demand[1][2] = 2;
        let mut c = ArrivalBatch::zero(4, 0);
        c.counts[1][2] = 1;
        let ctrl = Control {
            time: 0,
            actions: vec![VehicleAction::Pickup { from: 1, to: 2 }],
        };
        let next = step(&s, &ctrl, &c, &net, None).unwrap();
        assert_eq!(next.demand[1][2], 2);
        assert_eq!(next.time, 1);
        // t_12 = 1: the vehicle arrives next step and may act then
        assert_eq!(next.vehicles[0], VehicleStatus::EnRoute { dest: 2, remaining: 0 });
    }

    #[test]
    fn holding_while_waiting_charges_up_to_full() {
        let net = net4();
        let s = SystemState::round_robin(4, 1).with_charges(Charge::from_f64(0.8));
        let cp = ChargeParams::new(0.2, 0.1).unwrap();
        let next = step(&s, &Control::hold_all(0, 1), &ArrivalBatch::zero(4, 0), &net, Some(&cp)).unwrap();
        assert_eq!(next.charges, Some(vec![Charge::FULL]));
        let again = step(&next, &Control::hold_all(1, 1), &ArrivalBatch::zero(4, 1), &net, Some(&cp)).unwrap();
        assert_eq!(again.charges, Some(vec![Charge::FULL]));
        assert_eq!(again.vehicles, s.vehicles);
    }

    #[test]
    fn arrival_with_hold_becomes_waiting() {
        let net = net4();
        let mut s = SystemState::round_robin(4, 1);
        s.vehicles[0] = VehicleStatus::EnRoute { dest: 3, remaining: 0 };
        let next = step(&s, &Control::hold_all(0, 1), &ArrivalBatch::zero(4, 0), &net, None).unwrap();
        assert_eq!(next.vehicles[0], VehicleStatus::Waiting { station: 3 });
    }

    #[test]
    fn a_trip_discharges_once_per_step_including_arrival() {
        let net = Network::new(vec![vec![0, 3], vec![3, 0]]).unwrap();
        let cp = ChargeParams::new(0.2, 0.1).unwrap();
        let mut s = SystemState::empty(2, vec![VehicleStatus::Waiting { station: 0 }]).with_charges(Charge::from_f64(0.5));
        let go = Control {
            time: 0,
            actions: vec![VehicleAction::Rebalance { from: 0, to: 1 }],
        };
        s = step(&s, &go, &ArrivalBatch::zero(2, 0), &net, Some(&cp)).unwrap();
        for t in 1..3 {
            s = step(&s, &Control::hold_all(t, 1), &ArrivalBatch::zero(2, t), &net, Some(&cp)).unwrap();
        }
        assert_eq!(s.vehicles[0], VehicleStatus::EnRoute { dest: 1, remaining: 0 });
        assert_eq!(s.charges.as_ref().unwrap()[0], Charge::from_f64(0.2));
        s = step(&s, &Control::hold_all(3, 1), &ArrivalBatch::zero(2, 3), &net, Some(&cp)).unwrap();
        assert_eq!(s.vehicles[0], VehicleStatus::Waiting { station: 1 });
        assert_eq!(s.charges.as_ref().unwrap()[0], Charge::from_f64(0.4));
    }

    #[test]
    fn invalid_control_is_rejected_before_stepping() {
        let net = net4();
        let s = SystemState::round_robin(4, 1);
        let bad = Control {
            time: 0,
            actions: vec![VehicleAction::Pickup { from: 0, to: 1 }],
        };
        assert!(matches!(
            step(&s, &bad, &ArrivalBatch::zero(4, 0), &net, None),
            Err(ModelError::InvalidControl(_))
        ));
    }
}
