use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::demand::{generate_arrivals, RateSchedule};
use super::SimError;
use crate::dispatch::{seeded_rng, Controller, DecisionContext, Request, ARRIVAL_STREAM};
use crate::model::{
    step, validate_control, validate_state, ArrivalBatch, ChargeParams, Control, Network, SystemState, VehicleAction,
};
use crate::mpc::MpcDiagnostics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: Network,
    /// Starting state; its waiting customers become requests arriving at
    /// step 0. Charges must be present exactly when `charge` is.
    pub initial: SystemState,
    pub rates: RateSchedule,
    pub duration: u64,
    pub seed: u64,
    #[serde(default)]
    pub charge: Option<ChargeParams>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.network.n_stations();
        if self.duration == 0 {
            return Err(SimError::InvalidScenario("duration must be at least 1".into()));
        }
        if self.rates.n_stations() != n {
            return Err(SimError::InvalidScenario(format!(
                "rates cover {} stations, network has {n}",
                self.rates.n_stations()
            )));
        }
        let violations = validate_state(&self.initial, &self.network)?;
        if !violations.is_empty() {
            return Err(crate::model::ModelError::InvalidState(violations).into());
        }
        match (&self.charge, &self.initial.charges) {
            (Some(cp), Some(_)) => cp.validate()?,
            (None, None) => {}
            (Some(_), None) => return Err(SimError::InvalidScenario("charge parameters without initial charges".into())),
            (None, Some(_)) => return Err(SimError::InvalidScenario("initial charges without charge parameters".into())),
        }
        Ok(())
    }

    pub fn charging(&self) -> bool {
        self.charge.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// End the run once no customer is waiting.
    pub stop_when_empty: bool,
    /// Keep every intermediate state in the trace.
    pub keep_states: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop_when_empty: false,
            keep_states: true,
        }
    }
}

/// What happened during step `time`; queue figures are after the step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub time: u64,
    pub arrivals: u64,
    pub pickups: u32,
    pub rebalances: u32,
    pub waiting: i64,
    /// Mean over unserved requests of steps waited so far.
    pub avg_wait: f64,
    pub mean_charge: Option<f64>,
    pub waiting_by_station: Vec<i64>,
    pub charges: Option<Vec<f64>>,
    pub solver: Option<MpcDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub controller: String,
    pub seed: u64,
    pub initial: SystemState,
    pub controls: Vec<Control>,
    /// `states[t]` is the state at step `t`; empty unless kept.
    pub states: Vec<SystemState>,
    pub steps: Vec<StepRecord>,
    /// Every request, in arrival order.
    pub requests: Vec<Request>,
    pub final_state: SystemState,
}

impl Trace {
    pub fn served(&self) -> usize {
        self.requests.iter().filter(|r| r.pickup.is_some()).count()
    }

    pub fn pending(&self) -> usize {
        self.requests.len() - self.served()
    }

    /// First step after which no customer waited.
    pub fn emptied_at(&self) -> Option<u64> {
        if self.initial.total_waiting() == 0 {
            return Some(0);
        }
        self.steps.iter().find(|s| s.waiting == 0).map(|s| s.time + 1)
    }
}

pub fn run_simulation(scenario: &Scenario, controller: &mut dyn Controller) -> Result<Trace, SimError> {
    run_simulation_with(scenario, controller, None, &RunOptions::default())
}

/// Runs the closed loop. Arrivals are drawn from the scenario seed unless
/// given; draws are sequential in time, so every controller sees the same
/// realization regardless of how far ahead it reads.
pub fn run_simulation_with(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    arrivals: Option<&[ArrivalBatch]>,
    opts: &RunOptions,
) -> Result<Trace, SimError> {
    scenario.validate()?;
    let net = &scenario.network;
    let n = net.n_stations();
    let lookahead = controller.lookahead().max(1) as u64;
    let needed = scenario.duration + lookahead;
    let generated;
    let arrivals = match arrivals {
        Some(a) => {
            if (a.len() as u64) < needed {
                return Err(SimError::InvalidScenario(format!(
                    "{} arrival batches given, {needed} needed",
                    a.len()
                )));
            }
            a
        }
        None => {
            let mut rng = seeded_rng(scenario.seed, ARRIVAL_STREAM);
            generated = generate_arrivals(&scenario.rates, 0, needed, &mut rng);
            &generated[..]
        }
    };
    let charge = scenario.charge.as_ref();

    let mut requests: Vec<Request> = Vec::new();
    let mut pending: Vec<Vec<VecDeque<usize>>> = vec![vec![VecDeque::new(); n]; n];

    let mut state = scenario.initial.clone();
    state.time = 0;
    for (i, row) in state.demand.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            for _ in 0..d {
                add_request(&mut requests, &mut pending, i, j, 0);
            }
        }
    }
    let mut trace = Trace {
        controller: controller.name().to_string(),
        seed: scenario.seed,
        initial: state.clone(),
        controls: Vec::new(),
        states: Vec::new(),
        steps: Vec::new(),
        requests: Vec::new(),
        final_state: state.clone(),
    };
    let mut queue: Vec<Request> = Vec::new();

    for t in 0..scenario.duration {
        if opts.stop_when_empty && state.total_waiting() == 0 && t > 0 {
            break;
        }
        let batch = &arrivals[t as usize];
        for (i, row) in batch.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    add_request(&mut requests, &mut pending, i, j, t);
                }
            }
        }
        queue.clear();
        queue.extend(requests.iter().filter(|r| r.pickup.is_none()).cloned());
        let ctx = DecisionContext {
            state: &state,
            arrivals: batch,
            queue: &queue,
            net,
            charge,
            lookahead: &arrivals[t as usize..(t + lookahead) as usize],
            rates: &scenario.rates,
        };
        let control = controller.decide(&ctx).map_err(|source| SimError::Controller {
            controller: controller.name().to_string(),
            time: t,
            source,
        })?;
        let violations = validate_control(&state, batch, &control, net, charge, controller.capacity())?;
        if !violations.is_empty() || control.time != t {
            return Err(SimError::InvalidControl {
                controller: controller.name().to_string(),
                time: t,
                violations,
            });
        }
        let mut pickups = 0;
        let mut rebalances = 0;
        for (k, action) in control.actions.iter().enumerate() {
            match *action {
                VehicleAction::Pickup { from, to } => {
                    let idx = pending[from][to].pop_front().expect("validated against the queue");
                    requests[idx].vehicle = Some(k);
                    requests[idx].pickup = Some(t);
                    pickups += 1;
                }
                VehicleAction::Rebalance { .. } => rebalances += 1,
                VehicleAction::Hold => {}
            }
        }
        let next = step(&state, &control, batch, net, charge)?;
        let unserved: Vec<u64> = pending.iter().flatten().flatten().map(|&i| t + 1 - requests[i].arrival).collect();
        debug_assert_eq!(unserved.len() as i64, next.total_waiting());
        let avg_wait = if unserved.is_empty() {
            0.0
        } else {
            unserved.iter().sum::<u64>() as f64 / unserved.len() as f64
        };
        trace.steps.push(StepRecord {
            time: t,
            arrivals: batch.total(),
            pickups,
            rebalances,
            waiting: next.total_waiting(),
            avg_wait,
            mean_charge: next.mean_charge(),
            waiting_by_station: (0..n).map(|i| next.waiting_at(i)).collect(),
            charges: next.charges.as_ref().map(|c| c.iter().map(|q| q.to_f64()).collect()),
            solver: controller.diagnostics().cloned(),
        });
        if opts.keep_states {
            trace.states.push(state);
        }
        trace.controls.push(control);
        state = next;
    }
    trace.requests = requests;
    trace.final_state = state;
    Ok(trace)
}

fn add_request(
    requests: &mut Vec<Request>,
    pending: &mut [Vec<VecDeque<usize>>],
    origin: usize,
    dest: usize,
    arrival: u64,
) {
    pending[origin][dest].push_back(requests.len());
    requests.push(Request {
        id: requests.len() as u64,
        origin,
        dest,
        arrival,
        vehicle: None,
        pickup: None,
    });
}
