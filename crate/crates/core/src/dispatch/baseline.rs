use amod_milp::{rational_from_f64, Rational};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lp::{mass_transport, min_cost_assignment, min_cost_transport};
use super::round::Round;
use super::{Controller, DecisionContext, DispatchError};
use crate::model::{Control, Station, VehicleStatus};

/// Vehicles sent empty to serve a request. A commitment is dropped once
/// the vehicle can act again.
#[derive(Debug, Clone, Default)]
struct Commitments {
    target: Vec<Option<Station>>,
}

impl Commitments {
    fn sync(&mut self, ctx: &DecisionContext<'_>) {
        let m = ctx.state.fleet_size();
        self.target.resize(m, None);
        for (k, v) in ctx.state.vehicles.iter().enumerate() {
            if v.available_at().is_some() {
                self.target[k] = None;
            }
        }
    }

    /// Vehicles already sent to each station.
    fn inbound(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for s in self.target.iter().flatten() {
            out[*s] += 1;
        }
        out
    }

    /// Unserved requests not covered by an inbound vehicle, oldest first.
    /// The oldest requests at a station count as covered.
    fn uncovered(&self, round: &Round<'_, '_>) -> Vec<usize> {
        let inbound = self.inbound(round.by_origin.len());
        let mut out: Vec<usize> = round
            .by_origin
            .iter()
            .enumerate()
            .flat_map(|(i, q)| q.iter().skip(inbound[i]).copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Serves requests first come, first served with the closest free
/// vehicle; idle vehicles wander to a uniformly chosen other station.
#[derive(Debug, Clone)]
pub struct NearestNeighbor {
    rng: ChaCha8Rng,
    commitments: Commitments,
}

impl NearestNeighbor {
    pub fn new(rng: ChaCha8Rng) -> Self {
        NearestNeighbor {
            rng,
            commitments: Commitments::default(),
        }
    }
}

impl Controller for NearestNeighbor {
    fn name(&self) -> &str {
        "NN"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Control, DispatchError> {
        self.commitments.sync(ctx);
        let mut round = Round::new(ctx);
        round.local_pickups(|_| true);
        let net = ctx.net;
        for pos in self.commitments.uncovered(&round) {
            let origin = ctx.queue[pos].origin;
            let best = (0..round.fleet_size())
                .filter(|&k| self.commitments.target[k].is_none())
                .filter_map(|k| round.free_at(k).map(|at| (k, at)))
                .filter(|&(k, at)| at != origin && round.can_travel(k, at, origin))
                .min_by_key(|&(k, at)| (net.travel_time(at, origin), k));
            if let Some((k, _)) = best {
                round.rebalance(k, origin);
                self.commitments.target[k] = Some(origin);
            }
        }
        let n = net.n_stations();
        if n > 1 {
            for k in 0..round.fleet_size() {
                if let Some(at) = round.free_at(k) {
                    let mut to = self.rng.random_range(0..n - 1);
                    if to >= at {
                        to += 1;
                    }
                    round.rebalance(k, to);
                }
            }
        }
        Ok(round.finish())
    }
}

/// Queue threshold in force from step `start` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdStep {
    pub start: u64,
    pub threshold: u32,
}

pub(crate) fn validate_thresholds(steps: &[ThresholdStep]) -> Result<(), DispatchError> {
    if steps.first().map(|s| s.start) != Some(0) {
        return Err(DispatchError::Config("threshold schedule must start at step 0".into()));
    }
    if steps.windows(2).any(|w| w[0].start >= w[1].start) {
        return Err(DispatchError::Config("threshold starts must increase".into()));
    }
    if steps.iter().any(|s| s.threshold == 0) {
        return Err(DispatchError::Config("thresholds must be at least 1".into()));
    }
    Ok(())
}

/// Waits until enough requests have queued up, then dispatches free
/// vehicles to the oldest of them by a minimum-empty-travel matching.
#[derive(Debug, Clone)]
pub struct CollaborativeDispatch {
    thresholds: Vec<ThresholdStep>,
    commitments: Commitments,
}

impl CollaborativeDispatch {
    pub fn new(thresholds: Vec<ThresholdStep>) -> Result<Self, DispatchError> {
        validate_thresholds(&thresholds)?;
        Ok(CollaborativeDispatch {
            thresholds,
            commitments: Commitments::default(),
        })
    }

    pub fn threshold_at(&self, t: u64) -> u32 {
        self.thresholds
            .iter()
            .rev()
            .find(|s| s.start <= t)
            .map_or(self.thresholds[0].threshold, |s| s.threshold)
    }
}

impl Controller for CollaborativeDispatch {
    fn name(&self) -> &str {
        "CD"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Control, DispatchError> {
        // vehicles arriving on a commitment serve their origin first
        let arrived: Vec<bool> = ctx
            .state
            .vehicles
            .iter()
            .enumerate()
            .map(|(k, v)| {
                matches!(v, VehicleStatus::EnRoute { remaining: 0, .. })
                    && self.commitments.target.get(k).copied().flatten().is_some()
            })
            .collect();
        self.commitments.sync(ctx);
        let mut round = Round::new(ctx);
        round.local_pickups(|k| arrived[k]);

        let uncovered = self.commitments.uncovered(&round);
        if uncovered.len() < self.threshold_at(ctx.time()) as usize {
            return Ok(round.finish());
        }
        let free: Vec<(usize, Station)> = (0..round.fleet_size())
            .filter_map(|k| round.free_at(k).map(|at| (k, at)))
            .collect();
        let take = uncovered.len().min(free.len());
        let chosen = &uncovered[..take];
        let costs: Vec<Vec<Option<u64>>> = chosen
            .iter()
            .map(|&pos| {
                let r = &ctx.queue[pos];
                free.iter()
                    .map(|&(k, at)| {
                        let ok = if at == r.origin {
                            round.can_travel(k, at, r.dest)
                        } else {
                            round.can_travel(k, at, r.origin)
                        };
                        ok.then(|| ctx.net.travel_time(at, r.origin) as u64)
                    })
                    .collect()
            })
            .collect();
        let matching = min_cost_assignment(&costs)?;
        for (&pos, col) in chosen.iter().zip(matching) {
            let Some(col) = col else { continue };
            let (k, at) = free[col];
            let origin = ctx.queue[pos].origin;
            if at == origin {
                round.pickup(k);
            } else if round.rebalance(k, origin) {
                self.commitments.target[k] = Some(origin);
            }
        }
        Ok(round.finish())
    }
}

/// Source of the demand forecast used by the proportional rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandEstimate {
    /// Scenario rates summed over the coming epoch.
    #[default]
    TrueRates,
    /// Arrivals observed during the previous epoch.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RebalanceRule {
    /// Move free vehicles toward the share of expected plus waiting
    /// customers at each station, realized at random.
    Proportional,
    /// Spread vehicles in excess of waiting customers evenly.
    EvenExcess,
}

/// Local pickups every step plus a periodic fleet-wide rebalancing LP.
#[derive(Debug, Clone)]
pub struct MassRebalancing {
    epoch: u32,
    estimate: DemandEstimate,
    rule: RebalanceRule,
    rng: ChaCha8Rng,
    /// Per-origin arrivals since the last epoch start.
    observed: Vec<u64>,
}

impl MassRebalancing {
    pub fn new(epoch: u32, estimate: DemandEstimate, rule: RebalanceRule, rng: ChaCha8Rng) -> Self {
        MassRebalancing {
            epoch: epoch.max(1),
            estimate,
            rule,
            rng,
            observed: Vec::new(),
        }
    }

    fn expected_demand(&self, ctx: &DecisionContext<'_>) -> Vec<f64> {
        match self.estimate {
            DemandEstimate::TrueRates => ctx
                .rates
                .expected_counts(ctx.time(), self.epoch as u64)
                .iter()
                .map(|row| row.iter().sum())
                .collect(),
            DemandEstimate::Empirical => self.observed.iter().map(|&c| c as f64).collect(),
        }
    }

    fn proportional(&mut self, round: &mut Round<'_, '_>, observed: Vec<f64>) -> Result<(), DispatchError> {
        let ctx = round.ctx;
        let n = ctx.net.n_stations();
        let free: Vec<(usize, Station)> = (0..round.fleet_size())
            .filter_map(|k| round.free_at(k).map(|at| (k, at)))
            .collect();
        let mut counts = vec![0i64; n];
        for &(_, at) in &free {
            counts[at] += 1;
        }
        let weights: Vec<Rational> = (0..n)
            .map(|i| {
                let w = observed[i] + round.waiting_at(i) as f64;
                rational_from_f64(w).ok_or_else(|| DispatchError::Config(format!("demand weight {w} is not finite")))
            })
            .collect::<Result<_, _>>()?;
        let total: Rational = weights.iter().sum();
        let fleet = Rational::from_integer(free.len() as i64);
        if free.is_empty() || total == Rational::from_integer(0) {
            return Ok(());
        }
        let supply: Vec<Rational> = counts.iter().map(|&c| Rational::from_integer(c)).collect();
        let target: Vec<Rational> = weights.iter().map(|w| fleet * w / total).collect();
        let flows = mass_transport(&supply, &target, ctx.net.matrix())?;
        for &(k, at) in &free {
            let f = counts[at] as f64;
            let mut u = self.rng.random::<f64>() * f;
            let mut dest = at;
            for (j, &x) in flows[at].iter().enumerate() {
                if u < x {
                    dest = j;
                    break;
                }
                u -= x;
            }
            round.rebalance(k, dest);
        }
        Ok(())
    }

    fn even_excess(&self, round: &mut Round<'_, '_>) -> Result<(), DispatchError> {
        let ctx = round.ctx;
        let n = ctx.net.n_stations();
        let mut free_at = vec![Vec::new(); n];
        for k in 0..round.fleet_size() {
            if let Some(at) = round.free_at(k) {
                free_at[at].push(k);
            }
        }
        let mut excess = vec![0i64; n];
        for (i, e) in excess.iter_mut().enumerate() {
            let inbound = ctx
                .state
                .vehicles
                .iter()
                .filter(|v| matches!(v, VehicleStatus::EnRoute { dest, remaining } if *dest == i && *remaining > 0))
                .count();
            *e = (free_at[i].len() + inbound) as i64 - round.waiting_at(i) as i64;
        }
        let spare = excess.iter().sum::<i64>().max(0);
        let mut desired = vec![spare / n as i64; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(round.waiting_at(i)), i));
        for &i in order.iter().take((spare % n as i64) as usize) {
            desired[i] += 1;
        }
        let supply: Vec<u64> = (0..n)
            .map(|i| (excess[i] - desired[i]).clamp(0, free_at[i].len() as i64) as u64)
            .collect();
        let demand: Vec<u64> = (0..n).map(|i| (desired[i] - excess[i]).max(0) as u64).collect();
        if supply.iter().all(|&s| s == 0) || demand.iter().all(|&d| d == 0) {
            return Ok(());
        }
        let flows = min_cost_transport(&supply, &demand, ctx.net.matrix())?;
        for i in 0..n {
            let mut senders = free_at[i].iter();
            for (j, &count) in flows[i].iter().enumerate() {
                for _ in 0..count {
                    if let Some(&k) = senders.next() {
                        round.rebalance(k, j);
                    }
                }
            }
        }
        Ok(())
    }
}

impl Controller for MassRebalancing {
    fn name(&self) -> &str {
        match self.rule {
            RebalanceRule::Proportional => "MR",
            RebalanceRule::EvenExcess => "RR",
        }
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Control, DispatchError> {
        let n = ctx.net.n_stations();
        self.observed.resize(n, 0);
        let epoch_start = ctx.time() % self.epoch as u64 == 0;
        let estimate = epoch_start.then(|| self.expected_demand(ctx));
        if epoch_start {
            self.observed.iter_mut().for_each(|c| *c = 0);
        }
        for (i, row) in ctx.arrivals.counts.iter().enumerate() {
            self.observed[i] += row.iter().map(|&c| c as u64).sum::<u64>();
        }
        let mut round = Round::new(ctx);
        round.local_pickups(|_| true);
        if let Some(estimate) = estimate {
            match self.rule {
                RebalanceRule::Proportional => self.proportional(&mut round, estimate)?,
                RebalanceRule::EvenExcess => self.even_excess(&mut round)?,
            }
        }
        Ok(round.finish())
    }
}
