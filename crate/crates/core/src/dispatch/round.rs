use std::collections::VecDeque;

use super::DecisionContext;
use crate::model::{Control, Station, VehicleAction};

/// Scratch state for building one step's control: which vehicles have
/// acted and which requests are still unserved, per origin in arrival
/// order.
pub(crate) struct Round<'c, 'a> {
    pub ctx: &'c DecisionContext<'a>,
    actions: Vec<VehicleAction>,
    acted: Vec<bool>,
    /// Queue positions of unserved requests by origin.
    pub by_origin: Vec<VecDeque<usize>>,
}

impl<'c, 'a> Round<'c, 'a> {
    pub fn new(ctx: &'c DecisionContext<'a>) -> Self {
        let n = ctx.net.n_stations();
        let m = ctx.state.fleet_size();
        let mut by_origin = vec![VecDeque::new(); n];
        for (pos, r) in ctx.queue.iter().enumerate() {
            by_origin[r.origin].push_back(pos);
        }
        Round {
            ctx,
            actions: vec![VehicleAction::Hold; m],
            acted: vec![false; m],
            by_origin,
        }
    }

    pub fn fleet_size(&self) -> usize {
        self.actions.len()
    }

    /// Station vehicle `k` can still leave from this step.
    pub fn free_at(&self, k: usize) -> Option<Station> {
        if self.acted[k] {
            None
        } else {
            self.ctx.state.vehicles[k].available_at()
        }
    }

    pub fn can_travel(&self, k: usize, from: Station, to: Station) -> bool {
        match (self.ctx.charge, &self.ctx.state.charges) {
            (Some(cp), Some(q)) => q[k] >= cp.trip_cost(self.ctx.net.travel_time(from, to)),
            _ => true,
        }
    }

    /// Vehicle `k` serves the oldest unserved request at its station if the
    /// battery allows; returns whether it did.
    pub fn pickup(&mut self, k: usize) -> bool {
        let Some(at) = self.free_at(k) else {
            return false;
        };
        let Some(&pos) = self.by_origin[at].front() else {
            return false;
        };
        let dest = self.ctx.queue[pos].dest;
        if !self.can_travel(k, at, dest) {
            return false;
        }
        self.by_origin[at].pop_front();
        self.actions[k] = VehicleAction::Pickup { from: at, to: dest };
        self.acted[k] = true;
        true
    }

    /// Every free vehicle accepted by `eligible`, in index order, serves
    /// the head of its station's queue.
    pub fn local_pickups(&mut self, eligible: impl Fn(usize) -> bool) {
        for k in 0..self.fleet_size() {
            if eligible(k) {
                self.pickup(k);
            }
        }
    }

    /// Sends free vehicle `k` empty to `to`; returns whether it went.
    pub fn rebalance(&mut self, k: usize, to: Station) -> bool {
        let Some(at) = self.free_at(k) else {
            return false;
        };
        if at == to || !self.can_travel(k, at, to) {
            return false;
        }
        self.actions[k] = VehicleAction::Rebalance { from: at, to };
        self.acted[k] = true;
        true
    }

    /// Unserved requests at `origin`, oldest first.
    pub fn waiting_at(&self, origin: Station) -> usize {
        self.by_origin[origin].len()
    }

    pub fn finish(self) -> Control {
        Control {
            time: self.ctx.time(),
            actions: self.actions,
        }
    }
}
