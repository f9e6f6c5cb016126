//! Receding-horizon dispatch: build a horizon MILP from the current state
//! and an arrival forecast, solve it, and apply only the first step's
//! actions.

mod backend;
mod builder;
mod extract;
mod index;

use std::time::{Duration, Instant};

use amod_milp::{MilpError, SolveStatus, VarKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{ExternalSolver, SolverBackend};
pub use builder::{build_alg1, build_alg2, build_formulation, Formulation};
pub use extract::{decode_state, extract_control_at, extract_first_control, PlannedState, VALUE_TOL};
pub use index::{VarIndex, VarKey};

use crate::model::{
    min_stabilizing_horizon, ArrivalBatch, ChargeParams, Control, ModelError, Network, StationCapacity,
    SystemState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: u32,
    /// Weight on rebalancing travel time.
    pub rho1: f64,
    /// Reward per unit of charge at every planned step.
    pub rho2: f64,
    /// Reward per unit of charge at the end of the horizon.
    pub rho_c: f64,
    /// Weight on deviation from a uniform fleet at the end of the horizon.
    /// Zero drops the term and its slack columns.
    pub rho_u: f64,
    pub charging_enabled: bool,
    /// Per-step queue weights; step `tau` uses entry `min(tau - 1, len - 1)`.
    /// All ones when absent.
    pub priority: Option<Vec<Vec<Vec<f64>>>>,
    pub capacity: Option<StationCapacity>,
    /// Add redundant location and per-trip range rows. They do not change
    /// the feasible set.
    pub debug_rows: bool,
    /// Apply the all-Hold control, which is always feasible, when the solver
    /// stops at its limit without a plan. Otherwise such a step fails.
    pub hold_without_plan: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 4,
            rho1: 0.01,
            rho2: 0.001,
            rho_c: 0.0,
            rho_u: 0.0,
            charging_enabled: false,
            priority: None,
            capacity: None,
            debug_rows: false,
            hold_without_plan: false,
        }
    }
}

impl MpcConfig {
    pub fn with_horizon(horizon: u32) -> Self {
        MpcConfig {
            horizon,
            ..MpcConfig::default()
        }
    }

    pub fn charging(mut self) -> Self {
        self.charging_enabled = true;
        self
    }
}

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("forecast has {got} steps, horizon needs {expected}")]
    ForecastLength { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("charging is enabled but no charge parameters were given")]
    MissingChargeParams,
    #[error("horizon problem is infeasible")]
    Infeasible,
    #[error("horizon problem is unbounded")]
    Unbounded,
    #[error("solver stopped after {nodes} nodes without a feasible plan")]
    NoIncumbent { nodes: u64 },
    #[error("solution has no value for `{0}`")]
    MissingValue(String),
    #[error("`{name}` = {value} is not integral")]
    FractionalValue { name: String, value: f64 },
    #[error("vehicle {vehicle} has {count} actions at step {step}")]
    ConflictingActions { vehicle: usize, step: u32, count: usize },
    #[error("external solver: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Solver outcome for one control step. Wall time is not reproducible and
/// is kept out of exported traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpcDiagnostics {
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub nodes: u64,
    pub lp_iterations: u64,
    #[serde(skip)]
    pub wall_time: Duration,
    pub horizon: u32,
    pub stabilizing_horizon: u32,
    pub horizon_below_bound: bool,
    pub binaries: usize,
    pub continuous: usize,
    pub rows: usize,
    pub warnings: Vec<String>,
}

/// Builds, solves and decodes one horizon problem.
pub fn mpc_step(
    state: &SystemState,
    forecast: &[ArrivalBatch],
    net: &Network,
    cfg: &MpcConfig,
    charge: Option<&ChargeParams>,
    solver: &SolverBackend,
) -> Result<(Control, MpcDiagnostics), MpcError> {
    let started = Instant::now();
    let formulation = build_formulation(state, forecast, net, cfg, charge)?;
    let solution = solver.solve(&formulation.problem)?;
    match solution.status {
        SolveStatus::Infeasible => return Err(MpcError::Infeasible),
        SolveStatus::Unbounded => return Err(MpcError::Unbounded),
        SolveStatus::LimitReached if !solution.has_values() && !cfg.hold_without_plan => {
            return Err(MpcError::NoIncumbent { nodes: solution.nodes })
        }
        _ => {}
    }
    let (control, status) = if solution.has_values() {
        (extract_first_control(&solution, &formulation, state.time)?, format!("{:?}", solution.status))
    } else {
        (Control::hold_all(state.time, state.fleet_size()), "NoPlan".to_string())
    };
    let bound = min_stabilizing_horizon(net, if cfg.charging_enabled { charge } else { None });
    let p = &formulation.problem;
    let diagnostics = MpcDiagnostics {
        status,
        objective: solution.objective,
        bound: solution.bound,
        nodes: solution.nodes,
        lp_iterations: solution.lp_iterations,
        wall_time: started.elapsed(),
        horizon: cfg.horizon,
        stabilizing_horizon: bound,
        horizon_below_bound: cfg.horizon < bound,
        binaries: p.count_kind(VarKind::Binary),
        continuous: p.count_kind(VarKind::Continuous),
        rows: p.num_constraints(),
        warnings: formulation.warnings,
    };
    Ok((control, diagnostics))
}
