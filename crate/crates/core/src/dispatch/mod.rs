//! Controllers that turn the observed state and request queue into one
//! step's [`Control`]: four queue-driven baselines and the two
//! receding-horizon variants.

mod baseline;
mod lp;
mod predictive;
mod round;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{
    CollaborativeDispatch, DemandEstimate, MassRebalancing, NearestNeighbor, RebalanceRule, ThresholdStep,
};
pub use lp::{min_cost_assignment, min_cost_transport};
pub use predictive::{ForecastMode, PredictiveController};

use crate::model::{
    ArrivalBatch, ChargeParams, Control, ModelError, Network, Station, StationCapacity, SystemState,
};
use crate::mpc::{MpcConfig, MpcDiagnostics, MpcError, SolverBackend};
use crate::sim::RateSchedule;

/// One customer trip request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub origin: Station,
    pub dest: Station,
    pub arrival: u64,
    pub vehicle: Option<usize>,
    pub pickup: Option<u64>,
}

impl Request {
    /// Steps waited so far, or until pickup when served.
    pub fn wait(&self, now: u64) -> u64 {
        self.pickup.unwrap_or(now) - self.arrival
    }
}

/// Everything a controller may observe at step `state.time`.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    /// State before this step's arrivals are added to the queues.
    pub state: &'a SystemState,
    pub arrivals: &'a ArrivalBatch,
    /// Unserved requests including this step's arrivals, oldest first.
    pub queue: &'a [Request],
    pub net: &'a Network,
    pub charge: Option<&'a ChargeParams>,
    /// True arrivals from this step on; holds at least
    /// [`Controller::lookahead`] batches.
    pub lookahead: &'a [ArrivalBatch],
    pub rates: &'a RateSchedule,
}

impl DecisionContext<'_> {
    pub fn time(&self) -> u64 {
        self.state.time
    }
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] amod_milp::MilpError),
    #[error("invalid controller configuration: {0}")]
    Config(String),
    #[error("{0} relaxation is not integral")]
    Fractional(&'static str),
    #[error("{0} LP has no solution")]
    NoSolution(&'static str),
}

pub trait Controller {
    fn name(&self) -> &str;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Control, DispatchError>;

    /// Batches of true future arrivals the controller reads.
    fn lookahead(&self) -> usize {
        0
    }

    /// Parking limits the controller promises to respect.
    fn capacity(&self) -> Option<&StationCapacity> {
        None
    }

    /// Solver report for the most recent decision, if any.
    fn diagnostics(&self) -> Option<&MpcDiagnostics> {
        None
    }
}

/// Serializable controller choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerKind {
    Nn,
    Cd {
        #[serde(default = "default_thresholds")]
        thresholds: Vec<ThresholdStep>,
    },
    Mr {
        #[serde(default = "default_epoch")]
        epoch: u32,
        #[serde(default)]
        estimate: DemandEstimate,
    },
    Rr {
        #[serde(default = "default_epoch")]
        epoch: u32,
    },
    Mpcs {
        #[serde(default = "default_epoch")]
        epoch: u32,
        /// Weight on an even fleet at the end of the horizon; replaces
        /// `mpc.rho_u`.
        #[serde(default = "default_uniformity")]
        rho_u: f64,
        #[serde(default)]
        mpc: MpcConfig,
    },
    Mpcf {
        #[serde(default)]
        mpc: MpcConfig,
    },
}

fn default_thresholds() -> Vec<ThresholdStep> {
    vec![ThresholdStep { start: 0, threshold: 4 }]
}

fn default_epoch() -> u32 {
    20
}

fn default_uniformity() -> f64 {
    0.001
}

/// Stream ids keep controller randomness independent of arrival draws
/// made from the same seed.
pub const ARRIVAL_STREAM: u64 = 0;
const WALK_STREAM: u64 = 1;
const REBALANCE_STREAM: u64 = 2;
const SAMPLE_STREAM: u64 = 3;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ControllerKind {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerKind::Nn => "NN",
            ControllerKind::Cd { .. } => "CD",
            ControllerKind::Mr { .. } => "MR",
            ControllerKind::Rr { .. } => "RR",
            ControllerKind::Mpcs { .. } => "MPCS",
            ControllerKind::Mpcf { .. } => "MPCF",
        }
    }

    pub fn is_predictive(&self) -> bool {
        matches!(self, ControllerKind::Mpcs { .. } | ControllerKind::Mpcf { .. })
    }

    pub fn mpc_config(&self) -> Option<MpcConfig> {
        match self {
            ControllerKind::Mpcs { mpc, rho_u, .. } => Some(MpcConfig { rho_u: *rho_u, ..mpc.clone() }),
            ControllerKind::Mpcf { mpc } => Some(mpc.clone()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let epoch_ok = |e: u32| {
            if e == 0 {
                Err(DispatchError::Config("epochs must be at least 1".into()))
            } else {
                Ok(())
            }
        };
        match self {
            ControllerKind::Nn => Ok(()),
            ControllerKind::Cd { thresholds } => baseline::validate_thresholds(thresholds),
            ControllerKind::Mr { epoch, .. } | ControllerKind::Rr { epoch } => epoch_ok(*epoch),
            ControllerKind::Mpcs { epoch, mpc, rho_u } => {
                epoch_ok(*epoch)?;
                if mpc.rho_u != 0.0 && mpc.rho_u != *rho_u {
                    return Err(DispatchError::Config(
                        "set the uniformity weight as the controller's rho_u, not mpc.rho_u".into(),
                    ));
                }
                if mpc.horizon == 0 {
                    return Err(MpcError::ZeroHorizon.into());
                }
                Ok(())
            }
            ControllerKind::Mpcf { mpc } => {
                if mpc.horizon == 0 {
                    return Err(MpcError::ZeroHorizon.into());
                }
                Ok(())
            }
        }
    }

    /// Instantiates the controller; `seed` drives its private randomness.
    pub fn build(
        &self,
        seed: u64,
        charging: bool,
        solver: &SolverBackend,
    ) -> Result<Box<dyn Controller>, DispatchError> {
        self.validate()?;
        if let Some(cfg) = self.mpc_config() {
            if cfg.charging_enabled != charging {
                return Err(DispatchError::Config(format!(
                    "scenario {} charging but the MPC config has charging_enabled = {}",
                    if charging { "models" } else { "does not model" },
                    cfg.charging_enabled
                )));
            }
        }
        Ok(match self {
            ControllerKind::Nn => Box::new(NearestNeighbor::new(seeded_rng(seed, WALK_STREAM))),
            ControllerKind::Cd { thresholds } => Box::new(CollaborativeDispatch::new(thresholds.clone())?),
            ControllerKind::Mr { epoch, estimate } => Box::new(MassRebalancing::new(
                *epoch,
                *estimate,
                RebalanceRule::Proportional,
                seeded_rng(seed, REBALANCE_STREAM),
            )),
            ControllerKind::Rr { epoch } => Box::new(MassRebalancing::new(
                *epoch,
                DemandEstimate::TrueRates,
                RebalanceRule::EvenExcess,
                seeded_rng(seed, REBALANCE_STREAM),
            )),
            ControllerKind::Mpcs { epoch, .. } => Box::new(PredictiveController::new(
                self.mpc_config().expect("predictive"),
                solver.clone(),
                ForecastMode::Sampled {
                    epoch: *epoch,
                    rng: seeded_rng(seed, SAMPLE_STREAM),
                },
            )),
            ControllerKind::Mpcf { .. } => Box::new(PredictiveController::new(
                self.mpc_config().expect("predictive"),
                solver.clone(),
                ForecastMode::Oracle,
            )),
        })
    }
}
