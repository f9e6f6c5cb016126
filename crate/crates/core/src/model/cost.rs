use amod_milp::Rational;

use super::charge::Charge;
use super::network::Network;
use super::types::{ChargeParams, Control, SystemState, VehicleAction};
use super::ModelError;

/// Weighted count of waiting customers; all weights one when `priority`
/// is absent.
pub fn cost_jx(state: &SystemState, priority: Option<&[Vec<Rational>]>) -> Rational {
    let mut total = Rational::from_integer(0);
    for (i, row) in state.demand.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            let w = priority.map_or(Rational::from_integer(1), |q| q[i][j]);
            total += w * Rational::from_integer(d);
        }
    }
    total
}

/// Total travel time of the rebalancing trips in `ctrl`.
pub fn cost_ju(ctrl: &Control, net: &Network) -> u64 {
    ctrl.actions
        .iter()
        .map(|a| match *a {
            VehicleAction::Rebalance { from, to } => net.travel_time(from, to) as u64,
            _ => 0,
        })
        .sum()
}

/// Fleet state of charge.
pub fn cost_jc(state: &SystemState) -> Result<Charge, ModelError> {
    let charges = state.charges.as_ref().ok_or(ModelError::MissingCharges)?;
    Ok(charges.iter().copied().sum())
}

/// Shortest horizon for which the receding-horizon controller is
/// guaranteed to empty the queues under zero arrivals. With charging the
/// bound grows by the time needed to recharge a full trip.
pub fn min_stabilizing_horizon(net: &Network, charge: Option<&ChargeParams>) -> u32 {
    let t = net.max_travel_time() as i64;
    match charge {
        None => (2 * t) as u32,
        Some(cp) => {
            // 2 (1 + ad / ac) t = 2 t (ac + ad) / ac, exact in micro-units
            let ac = cp.alpha_c.micros();
            let num = 2 * t * (ac + cp.alpha_d.micros());
            ((num + ac - 1) / ac) as u32
        }
    }
}
