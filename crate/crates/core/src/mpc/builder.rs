use amod_milp::{
    rational_from_f64, ConstraintRow, LinearExpr, ObjectiveSense, Problem, Rational, VarId, VariableSpec,
};
use log::warn;

use super::index::{VarIndex, VarKey};
use super::{MpcConfig, MpcError};
use crate::model::{
    validate_state, ArrivalBatch, Charge, ChargeParams, ModelError, Network, SystemState, VehicleStatus,
};

/// A built horizon problem together with its variable map.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub problem: Problem,
    pub index: VarIndex,
    pub horizon: u32,
    pub n_stations: usize,
    pub fleet_size: usize,
    pub warnings: Vec<String>,
}

/// A state-variable value: fixed by the initial condition or a MILP column.
#[derive(Clone, Copy)]
enum Term {
    Fixed(Rational),
    Var(VarId),
}

fn add(expr: &mut LinearExpr, term: Term, coef: Rational) {
    match term {
        Term::Fixed(c) => {
            expr.add_constant(c * coef);
        }
        Term::Var(v) => {
            expr.add_term(v, coef);
        }
    }
}

fn int(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn charge_rational(c: Charge) -> Rational {
    Rational::new(c.micros(), Charge::SCALE)
}

fn weight(name: &str, value: f64) -> Result<Rational, MpcError> {
    if !(value >= 0.0) {
        return Err(MpcError::Config(format!("{name} must be a nonnegative number, got {value}")));
    }
    rational_from_f64(value).ok_or_else(|| MpcError::Config(format!("{name} = {value} is not representable")))
}

struct Builder<'a> {
    state: &'a SystemState,
    net: &'a Network,
    horizon: u32,
    problem: Problem,
    index: VarIndex,
}

impl Builder<'_> {
    fn var(&mut self, key: VarKey, spec: fn(String) -> VariableSpec) -> Result<VarId, MpcError> {
        let id = self.problem.add_variable(spec(key.to_string()))?;
        self.index.insert(key, id);
        Ok(id)
    }

    fn id(&self, key: VarKey) -> VarId {
        self.index.get(&key).expect("variable declared before use")
    }

    fn waiting(&self, vehicle: usize, station: usize, step: u32) -> Term {
        if step == 0 {
            let w = self.state.vehicles[vehicle] == VehicleStatus::Waiting { station };
            Term::Fixed(int(w as i64))
        } else {
            Term::Var(self.id(VarKey::Waiting { vehicle, station, step }))
        }
    }

    fn traveling(&self, vehicle: usize, dest: usize, remaining: u32, step: u32) -> Term {
        if step == 0 {
            let t = self.state.vehicles[vehicle] == VehicleStatus::EnRoute { dest, remaining };
            Term::Fixed(int(t as i64))
        } else {
            Term::Var(self.id(VarKey::Traveling { vehicle, dest, remaining, step }))
        }
    }

    fn demand(&self, from: usize, to: usize, step: u32) -> Term {
        if step == 0 {
            Term::Fixed(int(self.state.demand[from][to]))
        } else {
            Term::Var(self.id(VarKey::Demand { from, to, step }))
        }
    }

    fn charge(&self, vehicle: usize, step: u32) -> Term {
        if step == 0 {
            let q = self.state.charges.as_ref().expect("checked")[vehicle];
            Term::Fixed(charge_rational(q))
        } else {
            Term::Var(self.id(VarKey::Charge { vehicle, step }))
        }
    }

    /// Sum of both trip binaries of `vehicle` on every pair selected by `pick`.
    fn trips(&self, expr: &mut LinearExpr, vehicle: usize, step: u32, coef: impl Fn(usize, usize) -> Option<Rational>) {
        for (i, j) in self.net.pairs() {
            if let Some(c) = coef(i, j) {
                expr.add_term(self.id(VarKey::Pickup { vehicle, from: i, to: j, step }), c);
                expr.add_term(self.id(VarKey::Rebalance { vehicle, from: i, to: j, step }), c);
            }
        }
    }

    fn row(&mut self, row: ConstraintRow) -> Result<(), MpcError> {
        self.problem.add_constraint(row)?;
        Ok(())
    }
}

fn continuous_nonneg(name: String) -> VariableSpec {
    VariableSpec::nonnegative(name)
}

fn unit_interval(name: String) -> VariableSpec {
    VariableSpec::continuous(name, Some(int(0)), Some(int(1)))
}

fn binary(name: String) -> VariableSpec {
    VariableSpec::binary(name)
}

/// Builds the horizon problem without battery constraints.
pub fn build_alg1(
    state: &SystemState,
    forecast: &[ArrivalBatch],
    net: &Network,
    cfg: &MpcConfig,
) -> Result<Formulation, MpcError> {
    if cfg.charging_enabled {
        return Err(MpcError::Config("charging is enabled; use build_alg2".into()));
    }
    build(state, forecast, net, cfg, None)
}

/// Builds the horizon problem with per-vehicle charge states.
pub fn build_alg2(
    state: &SystemState,
    forecast: &[ArrivalBatch],
    net: &Network,
    cfg: &MpcConfig,
    charge: &ChargeParams,
) -> Result<Formulation, MpcError> {
    if !cfg.charging_enabled {
        return Err(MpcError::Config("charging is disabled; use build_alg1".into()));
    }
    build(state, forecast, net, cfg, Some(charge))
}

/// Dispatches on `cfg.charging_enabled`.
pub fn build_formulation(
    state: &SystemState,
    forecast: &[ArrivalBatch],
    net: &Network,
    cfg: &MpcConfig,
    charge: Option<&ChargeParams>,
) -> Result<Formulation, MpcError> {
    if cfg.charging_enabled {
        let cp = charge.ok_or(MpcError::MissingChargeParams)?;
        build_alg2(state, forecast, net, cfg, cp)
    } else {
        build_alg1(state, forecast, net, cfg)
    }
}

fn build(
    state: &SystemState,
    forecast: &[ArrivalBatch],
    net: &Network,
    cfg: &MpcConfig,
    charge: Option<&ChargeParams>,
) -> Result<Formulation, MpcError> {
    let h = cfg.horizon;
    if h == 0 {
        return Err(MpcError::ZeroHorizon);
    }
    if forecast.len() != h as usize {
        return Err(MpcError::ForecastLength {
            expected: h as usize,
            got: forecast.len(),
        });
    }
    let violations = validate_state(state, net)?;
    if !violations.is_empty() {
        return Err(ModelError::InvalidState(violations).into());
    }
    let n = net.n_stations();
    for batch in forecast {
        if batch.counts.len() != n || batch.counts.iter().any(|r| r.len() != n) {
            return Err(MpcError::Config(format!("forecast batch for step {} is not {n}x{n}", batch.time)));
        }
    }
    if let Some(cap) = &cfg.capacity {
        if cap.per_station.len() != n {
            return Err(MpcError::Config(format!("{} capacities for {n} stations", cap.per_station.len())));
        }
    }
    if charge.is_some() && state.charges.is_none() {
        return Err(ModelError::MissingCharges.into());
    }
    let rho1 = weight("rho1", cfg.rho1)?;
    let rho2 = weight("rho2", cfg.rho2)?;
    let rho_c = weight("rho_c", cfg.rho_c)?;
    let rho_u = weight("rho_u", cfg.rho_u)?;
    let priority: Option<Vec<Vec<Vec<Rational>>>> = match &cfg.priority {
        None => None,
        Some(schedule) => {
            if schedule.is_empty() {
                return Err(MpcError::Config("priority schedule is empty".into()));
            }
            let mut out = Vec::with_capacity(schedule.len());
            for m in schedule {
                if m.len() != n || m.iter().any(|r| r.len() != n) {
                    return Err(MpcError::Config(format!("priority matrix is not {n}x{n}")));
                }
                let mut rows = Vec::with_capacity(n);
                for row in m {
                    rows.push(row.iter().map(|&w| weight("priority", w)).collect::<Result<Vec<_>, _>>()?);
                }
                out.push(rows);
            }
            Some(out)
        }
    };
    let mut warnings = Vec::new();
    if charge.is_some() && cfg.rho2 == 0.0 && cfg.rho_c == 0.0 {
        let msg = "charging enabled with rho2 = rho_c = 0: charge states are not pushed to their upper bounds".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }

    let m = state.vehicles.len();
    let mut b = Builder {
        state,
        net,
        horizon: h,
        problem: Problem::new(),
        index: VarIndex::default(),
    };

    // columns, grouped by step so that ids follow time
    for tau in 0..h {
        for k in 0..m {
            for (i, j) in net.pairs() {
                b.var(VarKey::Pickup { vehicle: k, from: i, to: j, step: tau }, binary)?;
            }
            for (i, j) in net.pairs() {
                b.var(VarKey::Rebalance { vehicle: k, from: i, to: j, step: tau }, binary)?;
            }
        }
    }
    for tau in 1..=h {
        for k in 0..m {
            for i in 0..n {
                b.var(VarKey::Waiting { vehicle: k, station: i, step: tau }, binary)?;
            }
            for i in 0..n {
                for r in 0..=net.t_max(i) {
                    b.var(VarKey::Traveling { vehicle: k, dest: i, remaining: r, step: tau }, binary)?;
                }
            }
            if charge.is_some() {
                b.var(VarKey::Charge { vehicle: k, step: tau }, unit_interval)?;
            }
        }
        for (i, j) in net.pairs() {
            b.var(VarKey::Demand { from: i, to: j, step: tau }, continuous_nonneg)?;
        }
    }
    let target = if n == 0 { 0 } else { m.div_ceil(n) as i64 };
    if rho_u > int(0) {
        for i in 0..n {
            b.var(VarKey::Uniformity { station: i }, continuous_nonneg)?;
        }
    }

    for tau in 0..h {
        let next = tau + 1;
        let arrivals = &forecast[tau as usize].counts;
        // queue update and pickup cap
        for (i, j) in net.pairs() {
            let c = int(arrivals[i][j] as i64);
            let mut dyn_row = LinearExpr::new();
            add(&mut dyn_row, b.demand(i, j, next), int(1));
            add(&mut dyn_row, b.demand(i, j, tau), int(-1));
            let mut cap_row = LinearExpr::new();
            add(&mut cap_row, b.demand(i, j, tau), int(-1));
            for k in 0..m {
                let v = b.id(VarKey::Pickup { vehicle: k, from: i, to: j, step: tau });
                dyn_row.add_term(v, int(1));
                cap_row.add_term(v, int(1));
            }
            b.row(ConstraintRow::eq(format!("queue[{i}][{j}][{tau}]"), dyn_row, c))?;
            b.row(ConstraintRow::le(format!("serve[{i}][{j}][{tau}]"), cap_row, c))?;
        }
        for k in 0..m {
            // remaining-time counters shift down; departures enter at t_ji - 1
            for i in 0..n {
                let t_max = net.t_max(i);
                for r in 0..=t_max {
                    let mut e = LinearExpr::new();
                    add(&mut e, b.traveling(k, i, r, next), int(1));
                    if r < t_max {
                        add(&mut e, b.traveling(k, i, r + 1, tau), int(-1));
                    }
                    b.trips(&mut e, k, tau, |from, to| {
                        (to == i && net.travel_time(from, to) - 1 == r).then(|| int(-1))
                    });
                    b.row(ConstraintRow::eq(format!("travel[{k}][{i}][{r}][{tau}]"), e, int(0)))?;
                }
            }
            // waiting update: stay, arrive, or leave
            for i in 0..n {
                let mut e = LinearExpr::new();
                add(&mut e, b.waiting(k, i, next), int(1));
                add(&mut e, b.waiting(k, i, tau), int(-1));
                add(&mut e, b.traveling(k, i, 0, tau), int(-1));
                b.trips(&mut e, k, tau, |from, _| (from == i).then(|| int(1)));
                b.row(ConstraintRow::eq(format!("park[{k}][{i}][{tau}]"), e, int(0)))?;
            }
            // one task at a time
            let mut e = LinearExpr::new();
            for i in 0..n {
                add(&mut e, b.waiting(k, i, next), int(1));
            }
            b.trips(&mut e, k, tau, |_, _| Some(int(1)));
            b.row(ConstraintRow::le(format!("task[{k}][{tau}]"), e, int(1)))?;

            if cfg.debug_rows {
                let mut place = LinearExpr::new();
                let mut moving = LinearExpr::new();
                for i in 0..n {
                    add(&mut place, b.waiting(k, i, next), int(1));
                    for r in 0..=net.t_max(i) {
                        add(&mut place, b.traveling(k, i, r, next), int(1));
                        add(&mut moving, b.traveling(k, i, r, next), int(1));
                    }
                }
                b.row(ConstraintRow::eq(format!("where[{k}][{next}]"), place, int(1)))?;
                b.row(ConstraintRow::le(format!("onroad[{k}][{next}]"), moving, int(1)))?;
            }

            if let Some(cp) = charge {
                let ac = charge_rational(cp.alpha_c);
                let ad = charge_rational(cp.alpha_d);
                // q(t+1) <= q(t) + ac * waiting(t+1) - ad * traveling(t+1)
                let mut gain = LinearExpr::new();
                add(&mut gain, b.charge(k, next), int(1));
                add(&mut gain, b.charge(k, tau), int(-1));
                // q(t+1) <= 1 - ad * traveling(t+1)
                let mut full = LinearExpr::new();
                add(&mut full, b.charge(k, next), int(1));
                for i in 0..n {
                    add(&mut gain, b.waiting(k, i, next), -ac);
                    for r in 0..=net.t_max(i) {
                        add(&mut gain, b.traveling(k, i, r, next), ad);
                        add(&mut full, b.traveling(k, i, r, next), ad);
                    }
                }
                b.row(ConstraintRow::le(format!("charge[{k}][{next}]"), gain, int(0)))?;
                b.row(ConstraintRow::le(format!("full[{k}][{next}]"), full, int(1)))?;
                // range: q(t) >= ad * t_ij on whichever trip departs. At most
                // one trip binary per vehicle and step is set, so a single
                // aggregated row has the same integer solutions as one row per
                // trip.
                let mut range = LinearExpr::new();
                add(&mut range, b.charge(k, tau), int(1));
                b.trips(&mut range, k, tau, |from, to| Some(-(ad * int(net.travel_time(from, to) as i64))));
                b.row(ConstraintRow::ge(format!("range[{k}][{tau}]"), range, int(0)))?;
                if cfg.debug_rows {
                    for (i, j) in net.pairs() {
                        for (label, key) in [
                            ("range_v", VarKey::Pickup { vehicle: k, from: i, to: j, step: tau }),
                            ("range_w", VarKey::Rebalance { vehicle: k, from: i, to: j, step: tau }),
                        ] {
                            let mut e = LinearExpr::new();
                            add(&mut e, b.charge(k, tau), int(1));
                            e.add_term(b.id(key), -(ad * int(net.travel_time(i, j) as i64)));
                            b.row(ConstraintRow::ge(format!("{label}[{k}][{i}][{j}][{tau}]"), e, int(0)))?;
                        }
                    }
                }
            }
        }
        if let Some(cap) = &cfg.capacity {
            for i in 0..n {
                let mut e = LinearExpr::new();
                for k in 0..m {
                    add(&mut e, b.waiting(k, i, next), int(1));
                }
                b.row(ConstraintRow::le(format!("park_cap[{i}][{next}]"), e, int(cap.per_station[i] as i64)))?;
            }
        }
    }

    if rho_u > int(0) {
        for i in 0..n {
            // vehicles at or bound for station i when the horizon ends
            let mut count = LinearExpr::new();
            for k in 0..m {
                add(&mut count, b.waiting(k, i, h), int(1));
                for r in 0..=net.t_max(i) {
                    add(&mut count, b.traveling(k, i, r, h), int(1));
                }
            }
            let s = b.id(VarKey::Uniformity { station: i });
            let mut above = count.negated();
            above.add_term(s, int(1));
            b.row(ConstraintRow::ge(format!("uniform_hi[{i}]"), above, int(-target)))?;
            let mut below = count;
            below.add_term(s, int(1));
            b.row(ConstraintRow::ge(format!("uniform_lo[{i}]"), below, int(target)))?;
        }
    }

    let mut objective = LinearExpr::new();
    for tau in 1..=h {
        let q = priority.as_ref().map(|p| &p[((tau - 1) as usize).min(p.len() - 1)]);
        for (i, j) in net.pairs() {
            let w = q.map_or(int(1), |q| q[i][j]);
            add(&mut objective, b.demand(i, j, tau), w);
        }
    }
    if rho1 > int(0) {
        for tau in 0..h {
            for k in 0..m {
                for (i, j) in net.pairs() {
                    let w = b.id(VarKey::Rebalance { vehicle: k, from: i, to: j, step: tau });
                    objective.add_term(w, rho1 * int(net.travel_time(i, j) as i64));
                }
            }
        }
    }
    if charge.is_some() {
        for k in 0..m {
            for tau in 1..=h {
                add(&mut objective, b.charge(k, tau), -rho2);
            }
            add(&mut objective, b.charge(k, h), -rho_c);
        }
    }
    if rho_u > int(0) {
        for i in 0..n {
            objective.add_term(b.id(VarKey::Uniformity { station: i }), rho_u);
        }
    }
    b.problem.set_objective(objective, ObjectiveSense::Minimize)?;

    let Builder { problem, index, horizon, .. } = b;
    Ok(Formulation {
        problem,
        index,
        horizon,
        n_stations: n,
        fleet_size: m,
        warnings,
    })
}
