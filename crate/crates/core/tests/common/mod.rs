//! Random feasible instances shared by the integration tests.

#![allow(dead_code)]

use amod_core::model::{
    ArrivalBatch, Charge, ChargeParams, Control, Network, SystemState, VehicleAction, VehicleStatus,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_network<R: Rng>(rng: &mut R, n: usize, max_time: u32) -> Network {
    let times = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(1..=max_time)).collect())
        .collect();
    Network::new(times).unwrap()
}

/// A state passing `validate_state`: vehicles waiting or en route with an
/// admissible remaining count, nonnegative off-diagonal demand. With
/// `charge`, every vehicle en route holds enough charge to finish its trip,
/// which every state reachable from a charged start satisfies.
pub fn random_state<R: Rng>(
    rng: &mut R,
    net: &Network,
    m: usize,
    max_demand: i64,
    charge: Option<&ChargeParams>,
) -> SystemState {
    let n = net.n_stations();
    let mut charges = Vec::with_capacity(m);
    let vehicles = (0..m)
        .map(|_| {
            let station = rng.random_range(0..n);
            let mut status = VehicleStatus::Waiting { station };
            let mut floor = 0;
            if n > 1 && rng.random_bool(0.4) {
                let remaining = rng.random_range(0..=net.t_max(station));
                let needed = charge.map_or(0, |cp| cp.alpha_d.micros() * remaining as i64);
                if needed <= Charge::SCALE {
                    status = VehicleStatus::EnRoute { dest: station, remaining };
                    floor = needed;
                }
            }
            charges.push(Charge::from_micros(rng.random_range(floor..=Charge::SCALE)));
            status
        })
        .collect();
    let mut state = SystemState::empty(n, vehicles);
    for (i, j) in net.pairs() {
        state.demand[i][j] = rng.random_range(0..=max_demand);
    }
    if charge.is_some() {
        state.charges = Some(charges);
    }
    state
}

pub fn random_arrivals<R: Rng>(rng: &mut R, n: usize, time: u64, max: u32) -> ArrivalBatch {
    let mut batch = ArrivalBatch::zero(n, time);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            batch.counts[i][j] = rng.random_range(0..=max);
        }
    }
    batch
}

pub fn random_charge_params<R: Rng>(rng: &mut R) -> ChargeParams {
    ChargeParams::new(rng.random_range(0.01..0.5), rng.random_range(0.01..0.5)).unwrap()
}

/// A control passing `validate_control`: every free vehicle holds, picks
/// up a still-available customer, or rebalances, within its battery.
pub fn random_control<R: Rng>(
    rng: &mut R,
    state: &SystemState,
    arrivals: &ArrivalBatch,
    net: &Network,
    charge: Option<&ChargeParams>,
) -> Control {
    let n = net.n_stations();
    let mut left: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| state.demand[i][j] + arrivals.counts[i][j] as i64).collect())
        .collect();
    let mut ctrl = Control::hold_all(state.time, state.fleet_size());
    if n < 2 {
        return ctrl;
    }
    for (k, v) in state.vehicles.iter().enumerate() {
        let Some(at) = v.available_at() else { continue };
        let mut to = rng.random_range(0..n - 1);
        if to >= at {
            to += 1;
        }
        if let (Some(cp), Some(q)) = (charge, &state.charges) {
            if q[k] < cp.trip_cost(net.travel_time(at, to)) {
                continue;
            }
        }
        match rng.random_range(0..3) {
            0 => {}
            1 if left[at][to] > 0 => {
                left[at][to] -= 1;
                ctrl.actions[k] = VehicleAction::Pickup { from: at, to };
            }
            _ => ctrl.actions[k] = VehicleAction::Rebalance { from: at, to },
        }
    }
    ctrl
}

/// Solves one random horizon MILP and replays its per-step controls
/// through the simulator model. Returns `Ok(false)` if the solve did not
/// reach optimality.
pub fn milp_matches_rollout(seed: u64) -> Result<bool, String> {
    use amod_core::model::min_stabilizing_horizon;
    use amod_core::mpc::{build_formulation, decode_state, extract_control_at, MpcConfig, SolverBackend};
    use amod_milp::SolveStatus;

    let mut r = rng(seed);
    let n = r.random_range(2..=4usize);
    let m = r.random_range(1..=4usize);
    let charged = r.random_bool(0.5);
    // keep the binary count small enough for the built-in solver
    let budget = if charged { 128 } else { 384 };
    let max_h = (budget / (n * n * m)).clamp(1, 8);
    let horizon = r.random_range(1..=max_h) as u32;
    let net = random_network(&mut r, n, 2);
    let cp = charged.then(|| random_charge_params(&mut r));
    let state = random_state(&mut r, &net, m, 2, cp.as_ref());
    let forecast: Vec<ArrivalBatch> = (0..horizon).map(|t| random_arrivals(&mut r, n, t as u64, 1)).collect();
    let mut cfg = MpcConfig::with_horizon(horizon);
    if charged {
        cfg = cfg.charging();
    }
    let _ = min_stabilizing_horizon(&net, cp.as_ref());

    let f = build_formulation(&state, &forecast, &net, &cfg, cp.as_ref()).map_err(|e| e.to_string())?;
    let sol = SolverBackend::default().solve(&f.problem).map_err(|e| e.to_string())?;
    if sol.status != SolveStatus::Optimal {
        return Ok(false);
    }
    let mut rolled = state.clone();
    for tau in 0..horizon {
        let ctrl = extract_control_at(&sol, &f, tau, rolled.time).map_err(|e| e.to_string())?;
        rolled = amod_core::model::step(&rolled, &ctrl, &forecast[tau as usize], &net, cp.as_ref())
            .map_err(|e| format!("step {tau}: {e}"))?;
        let planned = decode_state(&sol, &f, tau + 1).map_err(|e| e.to_string())?;
        for (i, j) in net.pairs() {
            // demand is a continuous column of a floating-point simplex
            let d = planned.demand[i][j];
            if (d - rolled.demand[i][j] as f64).abs() > 1e-9 {
                return Err(format!("seed {seed} tau {}: d[{i}][{j}] = {d}, rollout {}", tau + 1, rolled.demand[i][j]));
            }
        }
        for (k, v) in rolled.vehicles.iter().enumerate() {
            for i in 0..n {
                let want = matches!(v, VehicleStatus::Waiting { station } if *station == i) as u8 as f64;
                if planned.waiting[k][i] != want {
                    return Err(format!("seed {seed} tau {}: u[{k}][{i}] = {}", tau + 1, planned.waiting[k][i]));
                }
                for (rem, &p) in planned.traveling[k][i].iter().enumerate() {
                    let want = matches!(v, VehicleStatus::EnRoute { dest, remaining }
                        if *dest == i && *remaining as usize == rem) as u8 as f64;
                    if p != want {
                        return Err(format!("seed {seed} tau {}: p[{k}][{i}][{rem}] = {p}", tau + 1));
                    }
                }
            }
        }
        if let (Some(planned), Some(actual)) = (&planned.charges, &rolled.charges) {
            for (k, (&p, a)) in planned.iter().zip(actual).enumerate() {
                if (p - a.to_f64()).abs() > 1e-9 {
                    return Err(format!("seed {seed} tau {}: q[{k}] = {p}, rollout {a}", tau + 1));
                }
            }
        } else if planned.charges.is_some() != rolled.charges.is_some() {
            return Err(format!("seed {seed}: charge presence differs"));
        }
    }
    Ok(true)
}

/// A small scenario with time-varying rates; charged when `charge` is set.
pub fn random_scenario(seed: u64, n: usize, m: usize, duration: u64, charge: Option<ChargeParams>) -> amod_core::sim::Scenario {
    use amod_core::sim::{RatePiece, RateSchedule, Scenario};
    let mut r = rng(seed);
    let network = random_network(&mut r, n, 3);
    let pieces = (0..3)
        .map(|p| RatePiece {
            start: p * duration / 3,
            rates: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 0.0 } else { r.random_range(0.0..0.3) }).collect())
                .collect(),
        })
        .collect();
    let mut initial = random_state(&mut r, &network, m, 2, charge.as_ref());
    initial.time = 0;
    Scenario {
        network,
        initial,
        rates: RateSchedule::new(pieces).unwrap(),
        duration,
        seed,
        charge,
    }
}
