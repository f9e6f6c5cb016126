use std::time::Duration;

use crate::error::MilpError;
use crate::problem::{Problem, VarId};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub integrality_tol: f64,
    pub lp_feasibility_tol: f64,
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
    pub deterministic: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            integrality_tol: 1e-6,
            lp_feasibility_tol: 1e-9,
            max_nodes: 1_000_000,
            time_limit: None,
            deterministic: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), MilpError> {
        if !(self.integrality_tol > 0.0) || !(self.lp_feasibility_tol > 0.0) {
            return Err(MilpError::InvalidParams("tolerances must be positive"));
        }
        if self.max_nodes == 0 {
            return Err(MilpError::InvalidParams("max_nodes must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// One value per variable; present when optimal, or when a limit was hit
    /// after an incumbent was found.
    pub values: Option<Vec<f64>>,
    /// Objective in the problem's own sense (not negated for maximization).
    pub objective: f64,
    /// Best proven bound, in the same sense as `objective`.
    pub bound: f64,
    pub nodes: u64,
    pub lp_iterations: u64,
}

impl Solution {
    pub(crate) fn without_values(status: SolveStatus, problem: &Problem) -> Self {
        let value = match status {
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        let reported = problem.report_objective(value);
        Solution {
            status,
            values: None,
            objective: reported,
            bound: reported,
            nodes: 0,
            lp_iterations: 0,
        }
    }

    pub fn value(&self, id: VarId) -> Option<f64> {
        self.values.as_ref().map(|v| v[id.index()])
    }

    pub fn has_values(&self) -> bool {
        self.values.is_some()
    }
}
