//! Acceptance suite. Prints one PASS/FAIL line per criterion. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p amod-core --test acceptance -- 4 5`, and `--strict` to
//! exit nonzero if any selected criterion fails. Without `--strict` a FAIL
//! line is reported but does not fail `cargo test`.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use amod_core::dispatch::ControllerKind;
use amod_core::model::{
    min_stabilizing_horizon, step, validate_control, validate_state, ArrivalBatch, Charge, ChargeParams, Network,
    SystemState, VehicleStatus,
};
use amod_core::mpc::{MpcConfig, SolverBackend};
use amod_core::sim::{
    compute_metrics, run_simulation, run_simulation_with, write_trace_files, Metrics, RatePiece, RateSchedule,
    RunOptions, Scenario, Trace,
};
use amod_milp::{
    brute_force_milp, solve_milp, ConstraintRow, LinearExpr, ObjectiveSense, Problem, Rational, Sense, SolveStatus,
    SolverParams, VariableSpec,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed <= limit
}

// 1: persistent feasibility

fn persistent_feasibility() -> Outcome {
    let started = Instant::now();
    let mut r = common::rng(1);
    let pairs = 10_000;
    let mut failures = 0;
    for _ in 0..pairs {
        let n = r.random_range(1..=6usize);
        let m = r.random_range(0..=10usize);
        let net = common::random_network(&mut r, n, 5);
        let cp = r.random_bool(0.5).then(|| common::random_charge_params(&mut r));
        let state = common::random_state(&mut r, &net, m, 5, cp.as_ref());
        let zero = ArrivalBatch::zero(n, state.time);
        let ctrl = common::random_control(&mut r, &state, &zero, &net, cp.as_ref());
        assert!(validate_state(&state, &net).unwrap().is_empty());
        assert!(validate_control(&state, &zero, &ctrl, &net, cp.as_ref(), None).unwrap().is_empty());
        match step(&state, &ctrl, &zero, &net, cp.as_ref()) {
            Ok(next) if validate_state(&next, &net).unwrap().is_empty() => {}
            _ => failures += 1,
        }
    }
    let elapsed = started.elapsed();
    outcome(
        failures == 0 && within(Duration::from_secs(30), elapsed),
        format!("{pairs} pairs, {failures} infeasible successors, {elapsed:.1?} (limit 30s)"),
    )
}

// 2: solver against exhaustive enumeration

fn random_milp<R: Rng>(r: &mut R) -> Problem {
    let int = |v: i64| Rational::from_integer(v);
    let binaries = r.random_range(1..=12usize);
    let continuous = r.random_range(0..=3usize);
    let mut p = Problem::new();
    let mut vars = Vec::new();
    for i in 0..binaries {
        vars.push(p.add_variable(VariableSpec::binary(format!("b{i}"))).unwrap());
    }
    for i in 0..continuous {
        let lo = r.random_range(-3..=2i64);
        let spec = VariableSpec::continuous(format!("y{i}"), Some(int(lo)), Some(int(lo + r.random_range(0..=4))));
        vars.push(p.add_variable(spec).unwrap());
    }
    for k in 0..r.random_range(0..=10usize) {
        let expr = LinearExpr::from_terms(vars.iter().map(|&v| (v, int(r.random_range(-4..=4)))));
        let sense = match r.random_range(0..5) {
            0 | 1 => Sense::Le,
            2 | 3 => Sense::Ge,
            _ => Sense::Eq,
        };
        p.add_constraint(ConstraintRow::new(format!("c{k}"), expr, sense, int(r.random_range(-4..=8))))
            .unwrap();
    }
    let obj = LinearExpr::from_terms(vars.iter().map(|&v| (v, int(r.random_range(-5..=5)))));
    let sense = if r.random_bool(0.5) {
        ObjectiveSense::Maximize
    } else {
        ObjectiveSense::Minimize
    };
    p.set_objective(obj, sense).unwrap();
    p
}

fn solver_oracle() -> Outcome {
    let started = Instant::now();
    let mut r = common::rng(2);
    let params = SolverParams::default();
    let instances = 300;
    let (mut mismatched, mut infeasible) = (0, 0);
    for _ in 0..instances {
        let p = random_milp(&mut r);
        let bb = solve_milp(&p, &params).unwrap();
        let brute = brute_force_milp(&p, &params).unwrap();
        if brute.status == SolveStatus::Infeasible {
            infeasible += 1;
        }
        let agree = bb.status == brute.status
            && (bb.status != SolveStatus::Optimal
                || (bb.objective - brute.objective).abs() <= 1e-6 * brute.objective.abs().max(1.0));
        if !agree {
            mismatched += 1;
        }
    }
    let elapsed = started.elapsed();
    outcome(
        mismatched == 0 && within(Duration::from_secs(60), elapsed),
        format!(
            "{instances} instances ({infeasible} infeasible), {mismatched} disagreements, {elapsed:.1?} (limit 60s)"
        ),
    )
}

// 3: horizon plan against the simulator model

fn milp_consistency() -> Outcome {
    let instances = 50;
    let mut errors = Vec::new();
    let mut not_optimal = 0;
    for seed in 0..instances {
        match common::milp_matches_rollout(1000 + seed) {
            Ok(true) => {}
            Ok(false) => not_optimal += 1,
            Err(e) => errors.push(e),
        }
    }
    outcome(
        errors.is_empty() && not_optimal == 0,
        format!(
            "{instances} formulations, {not_optimal} not solved to optimality, {} mismatches{}",
            errors.len(),
            errors.first().map_or(String::new(), |e| format!(" (first: {e})"))
        ),
    )
}

// 4 and 5: regulation under zero arrivals

const REGULATION_STATIONS: usize = 4;
const REGULATION_FLEET: usize = 6;

/// Unit travel times keep the charged horizon problems within reach of the
/// built-in solver.
fn regulation_instances() -> Vec<(Network, SystemState)> {
    let mut r = common::rng(4);
    let net = Network::uniform(REGULATION_STATIONS, 1).unwrap();
    (0..20)
        .map(|_| {
            let vehicles = (0..REGULATION_FLEET)
                .map(|_| VehicleStatus::Waiting {
                    station: r.random_range(0..REGULATION_STATIONS),
                })
                .collect();
            let mut state = SystemState::empty(REGULATION_STATIONS, vehicles);
            for (i, j) in net.pairs() {
                state.demand[i][j] = r.random_range(0..=5);
            }
            (net.clone(), state)
        })
        .collect()
}

struct Regulation {
    emptied_at: Option<u64>,
    /// Blocks of `horizon` steps starting with customers waiting but
    /// serving none.
    idle_blocks: usize,
    /// Steps whose horizon problem hit the node budget.
    limited: usize,
    /// Budget-limited steps without any plan, which hold the fleet.
    held: usize,
}

fn regulate(net: &Network, initial: SystemState, charge: Option<ChargeParams>, solver: &SolverBackend) -> Regulation {
    let n = net.n_stations();
    let horizon = min_stabilizing_horizon(net, charge.as_ref());
    let mut mpc = MpcConfig::with_horizon(horizon);
    if charge.is_some() {
        mpc = mpc.charging();
        mpc.hold_without_plan = true;
    }
    let scenario = Scenario {
        network: net.clone(),
        initial,
        rates: RateSchedule::zero(n),
        duration: 400,
        seed: 0,
        charge,
    };
    let kind = ControllerKind::Mpcf { mpc };
    let mut controller = kind.build(0, scenario.charging(), solver).unwrap();
    let opts = RunOptions {
        stop_when_empty: true,
        keep_states: true,
    };
    let trace = run_simulation_with(&scenario, controller.as_mut(), None, &opts).unwrap();
    let h = horizon as usize;
    let idle_blocks = (0..trace.steps.len())
        .step_by(h)
        .filter(|&s| trace.states[s].total_waiting() > 0)
        .filter(|&s| trace.steps[s..(s + h).min(trace.steps.len())].iter().all(|r| r.pickups == 0))
        .count();
    let limited = trace
        .steps
        .iter()
        .filter(|r| r.solver.as_ref().is_some_and(|d| d.status != "Optimal"))
        .count();
    let held = trace
        .steps
        .iter()
        .filter(|r| r.solver.as_ref().is_some_and(|d| d.status == "NoPlan"))
        .count();
    Regulation {
        emptied_at: (trace.final_state.total_waiting() == 0).then(|| trace.steps.len() as u64),
        idle_blocks,
        limited,
        held,
    }
}

fn regulation_charge() -> ChargeParams {
    ChargeParams::new(0.2, 0.1).unwrap()
}

fn regulation_uncharged() -> (Outcome, Vec<Option<u64>>) {
    let started = Instant::now();
    let runs: Vec<Regulation> = regulation_instances()
        .into_iter()
        .map(|(net, state)| regulate(&net, state, None, &SolverBackend::default()))
        .collect();
    let elapsed = started.elapsed();
    let emptied = runs.iter().filter(|r| r.emptied_at.is_some()).count();
    let idle: usize = runs.iter().map(|r| r.idle_blocks).sum();
    let steps: Vec<Option<u64>> = runs.iter().map(|r| r.emptied_at).collect();
    (
        outcome(
            emptied == runs.len() && idle == 0 && within(Duration::from_secs(120), elapsed),
            format!(
                "{emptied}/{} emptied, {idle} blocks without service, steps {:?}, {elapsed:.1?} (limit 120s)",
                runs.len(),
                steps.iter().flatten().collect::<Vec<_>>()
            ),
        ),
        steps,
    )
}

/// Node budget per charged horizon problem. A few of these problems have a
/// root gap the plain branch and bound does not close in thousands of
/// nodes; past the budget the best plan found so far is applied, or the
/// fleet holds for one step if there is none.
const CHARGED_NODE_BUDGET: u64 = 2000;

fn regulation_charged(uncharged: &[Option<u64>]) -> Outcome {
    let cp = regulation_charge();
    let solver = SolverBackend::Builtin(SolverParams {
        max_nodes: CHARGED_NODE_BUDGET,
        ..SolverParams::default()
    });
    let started = Instant::now();
    let runs: Vec<Regulation> = regulation_instances()
        .into_iter()
        .map(|(net, state)| regulate(&net, state.with_charges(Charge::from_f64(0.8)), Some(cp.clone()), &solver))
        .collect();
    let elapsed = started.elapsed();
    let emptied = runs.iter().filter(|r| r.emptied_at.is_some()).count();
    let slower = runs
        .iter()
        .zip(uncharged)
        .filter(|(c, u)| matches!((c.emptied_at, u), (Some(c), Some(u)) if c >= *u))
        .count();
    let needed = (runs.len() * 4).div_ceil(5);
    let limited: usize = runs.iter().map(|r| r.limited).sum();
    let held: usize = runs.iter().map(|r| r.held).sum();
    outcome(
        emptied == runs.len() && slower >= needed,
        format!(
            "{emptied}/{} emptied, {slower}/{} no faster than uncharged (need {needed}), steps {:?}, \
             {limited} steps at the {CHARGED_NODE_BUDGET}-node budget ({held} without a plan), {elapsed:.1?}",
            runs.len(),
            runs.len(),
            runs.iter().filter_map(|r| r.emptied_at).collect::<Vec<_>>()
        ),
    )
}

// 6: charge-rate ordering

/// Demand over a working day in 4-minute steps: quiet start, morning peak,
/// busy midday, and an evening peak running to the end.
fn day_rates(n: usize, scale: f64) -> RateSchedule {
    let shape = [(0, 0.4), (15, 1.0), (45, 0.8), (90, 1.1)];
    let pieces = shape
        .iter()
        .map(|&(start, level)| RatePiece {
            start,
            rates: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { 0.0 } else { scale * level / (n - 1) as f64 })
                        .collect()
                })
                .collect(),
        })
        .collect();
    RateSchedule::new(pieces).unwrap()
}

/// Arrivals per station and step at level 1. The fleet can sustain a
/// driving share of at most `alpha_c / (alpha_c + alpha_d)`, 1/2 to 4/5 over
/// the three rates; this load sits between them.
const DAY_LOAD: f64 = 0.63;

fn charge_ordering() -> Outcome {
    let started = Instant::now();
    let n = 4;
    let m = 4;
    let alpha_d = 0.01;
    let net = Network::uniform(n, 1).unwrap();
    let mut finals = Vec::new();
    for factor in [1.0, 2.0, 4.0] {
        let cp = ChargeParams::new(factor * alpha_d, alpha_d).unwrap();
        let scenario = Scenario {
            network: net.clone(),
            initial: SystemState::round_robin(n, m).with_charges(Charge::from_f64(0.8)),
            rates: day_rates(n, DAY_LOAD),
            duration: 120,
            seed: 6,
            charge: Some(cp.clone()),
        };
        let mpc = MpcConfig::with_horizon(min_stabilizing_horizon(&net, Some(&cp))).charging();
        let kind = ControllerKind::Mpcs {
            epoch: 20,
            rho_u: 0.001,
            mpc,
        };
        let mut controller = kind.build(6, true, &SolverBackend::default()).unwrap();
        let trace = run_simulation(&scenario, controller.as_mut()).unwrap();
        finals.push(trace.final_state.mean_charge().unwrap());
    }
    let ordered = finals.windows(2).all(|w| w[0] <= w[1]);
    outcome(
        ordered && finals[0] < 0.2 && finals[2] > 0.5,
        format!(
            "final mean charge {:.3} / {:.3} / {:.3} for 1x/2x/4x charge rate, {:.1?}",
            finals[0],
            finals[1],
            finals[2],
            started.elapsed()
        ),
    )
}

// 7: controller ordering

const ORDERING_STATIONS: usize = 5;
const ORDERING_FLEET: usize = 8;
/// Twice the longest trip, the shortest horizon over which a vehicle can
/// reach any customer and carry them to any destination.
const ORDERING_HORIZON: u32 = 4;
/// Arrival rate per destination from the two popular origins.
const POPULAR_RATE: f64 = 0.3;
/// Upper end of the uniform draw for every other origin.
const OTHER_RATE: f64 = 0.08;
/// Steps between RR rebalancing rounds and between MPCS forecast draws.
const ORDERING_EPOCH: u32 = 1;

fn ordering_scenario(seed: u64) -> Scenario {
    let mut r = common::rng(7);
    let n = ORDERING_STATIONS;
    let times: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // hops around a ring, one to two steps
                    let d = (i + n - j) % n;
                    (d.min(n - d) as u32).max(1)
                })
                .collect()
        })
        .collect();
    let network = Network::new(times).unwrap();
    // a popular origin that moves over the run
    let pieces = [0, 20, 40]
        .iter()
        .enumerate()
        .map(|(p, &start)| RatePiece {
            start,
            rates: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                0.0
                            } else if i == p || i == p + 2 {
                                POPULAR_RATE
                            } else {
                                r.random_range(0.0..OTHER_RATE)
                            }
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    Scenario {
        network,
        initial: SystemState::round_robin(n, ORDERING_FLEET),
        rates: RateSchedule::new(pieces).unwrap(),
        duration: 60,
        seed,
        charge: None,
    }
}

fn controller_ordering() -> Outcome {
    let started = Instant::now();
    let mpc = MpcConfig::with_horizon(ORDERING_HORIZON);
    let kinds = [
        ControllerKind::Nn,
        ControllerKind::Rr { epoch: ORDERING_EPOCH },
        ControllerKind::Mpcs {
            epoch: ORDERING_EPOCH,
            rho_u: 0.001,
            mpc: mpc.clone(),
        },
        ControllerKind::Mpcf { mpc },
    ];
    let seeds = 5u64;
    let mut peaks = vec![[0.0f64; 4]; seeds as usize];
    for seed in 0..seeds {
        let scenario = ordering_scenario(100 + seed);
        for (c, kind) in kinds.iter().enumerate() {
            let mut controller = kind.build(seed, false, &SolverBackend::default()).unwrap();
            let trace = run_simulation(&scenario, controller.as_mut()).unwrap();
            peaks[seed as usize][c] = compute_metrics(&trace).peak_wait;
        }
    }
    let mpcs_wins = peaks.iter().filter(|p| p[2] < p[0]).count();
    let rr_wins = peaks.iter().filter(|p| p[1] < p[0]).count();
    let regime: Vec<&[f64; 4]> = peaks.iter().filter(|p| p[3] < ORDERING_HORIZON as f64).collect();
    let mean = |c: usize| regime.iter().map(|p| p[c]).sum::<f64>() / regime.len().max(1) as f64;
    let mpcf_ok = regime.is_empty() || mean(3) <= mean(2);
    let elapsed = started.elapsed();
    let table: Vec<String> = peaks
        .iter()
        .map(|p| format!("[{:.2} {:.2} {:.2} {:.2}]", p[0], p[1], p[2], p[3]))
        .collect();
    outcome(
        mpcs_wins >= 4 && rr_wins >= 4 && mpcf_ok && within(Duration::from_secs(600), elapsed),
        format!(
            "MPCS<NN {mpcs_wins}/5, RR<NN {rr_wins}/5, MPCF {:.2} vs MPCS {:.2} over {} seeds in regime; \
             peak NN/RR/MPCS/MPCF {}; {elapsed:.1?} (limit 600s)",
            mean(3),
            mean(2),
            regime.len(),
            table.join(" ")
        ),
    )
}

// 8: determinism

fn export(trace: &Trace, metrics: &Metrics, dir: &Path) -> Vec<(String, Vec<u8>)> {
    write_trace_files(trace, metrics, dir, "").unwrap();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let cp = ChargeParams::new(0.05, 0.02).unwrap();
    let cases: Vec<(ControllerKind, Option<ChargeParams>)> = vec![
        (ControllerKind::Nn, None),
        (ControllerKind::Mr { epoch: 4, estimate: Default::default() }, Some(cp.clone())),
        (
            ControllerKind::Mpcs {
                epoch: 5,
                rho_u: 0.001,
                mpc: MpcConfig::with_horizon(2),
            },
            None,
        ),
        (ControllerKind::Mpcf { mpc: MpcConfig::with_horizon(2).charging() }, Some(cp)),
    ];
    let mut differing = Vec::new();
    for (kind, charge) in &cases {
        let scenario = common::random_scenario(8, 3, 3, 25, charge.clone());
        let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|_| {
                let mut c = kind.build(8, charge.is_some(), &SolverBackend::default()).unwrap();
                let trace = run_simulation(&scenario, c.as_mut()).unwrap();
                let dir = tempfile::tempdir().unwrap();
                export(&trace, &compute_metrics(&trace), dir.path())
            })
            .collect();
        if runs[0] != runs[1] {
            differing.push(kind.label());
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} configurations run twice, differing: {differing:?}", cases.len()),
    )
}

// 9: horizon bounds

fn horizon_bounds() -> Outcome {
    let mut times = vec![vec![3u32; 4]; 4];
    times[0][3] = 7;
    let net = Network::new(times).unwrap();
    let plain = min_stabilizing_horizon(&net, None);
    let charged = min_stabilizing_horizon(&net, Some(&ChargeParams::new(0.2, 0.1).unwrap()));
    outcome(
        plain == 14 && charged == 21,
        format!("max travel time 7: {plain} without charging, {charged} with"),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args.iter().any(|a| a == "--strict");
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let want = |c: u32| selected.is_empty() || selected.contains(&c);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut uncharged_steps = None;
    if want(1) {
        results.push((1, "persistent feasibility", persistent_feasibility()));
    }
    if want(2) {
        results.push((2, "solver matches enumeration", solver_oracle()));
    }
    if want(3) {
        results.push((3, "horizon plan matches model rollout", milp_consistency()));
    }
    if want(4) || want(5) {
        let (o, steps) = regulation_uncharged();
        uncharged_steps = Some(steps);
        if want(4) {
            results.push((4, "regulation without charging", o));
        }
    }
    if want(5) {
        let steps = uncharged_steps.as_deref().unwrap();
        results.push((5, "regulation with charging", regulation_charged(steps)));
    }
    if want(6) {
        results.push((6, "charge-rate ordering", charge_ordering()));
    }
    if want(7) {
        results.push((7, "controller ordering", controller_ordering()));
    }
    if want(8) {
        results.push((8, "determinism", determinism()));
    }
    if want(9) {
        results.push((9, "horizon bounds", horizon_bounds()));
    }
    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
