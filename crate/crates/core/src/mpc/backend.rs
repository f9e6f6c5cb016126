use std::process::Command;

use amod_milp::{lp_format, solve_milp, Problem, Solution, SolverParams};
use log::debug;
use serde::{Deserialize, Serialize};

use super::MpcError;

/// Shell-free command line for a third-party solver. `{lp}` and `{sol}` in
/// any argument are replaced by the problem and solution file paths. The
/// solver must write the `status=` / `name value` format read by
/// [`lp_format::read_solution`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSolver {
    pub command: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverBackend {
    Builtin(SolverParams),
    External(ExternalSolver),
}

impl Default for SolverBackend {
    fn default() -> Self {
        SolverBackend::Builtin(SolverParams::default())
    }
}

impl SolverBackend {
    pub fn solve(&self, problem: &Problem) -> Result<Solution, MpcError> {
        match self {
            SolverBackend::Builtin(params) => Ok(solve_milp(problem, params)?),
            SolverBackend::External(ext) => ext.solve(problem),
        }
    }
}

impl ExternalSolver {
    pub fn solve(&self, problem: &Problem) -> Result<Solution, MpcError> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| MpcError::External("empty command".into()))?;
        let dir = tempfile::tempdir()?;
        let lp = dir.path().join("problem.lp");
        let sol = dir.path().join("problem.sol");
        lp_format::write_lp_file(problem, &lp)?;
        let substitute = |arg: &str| {
            arg.replace("{lp}", &lp.to_string_lossy())
                .replace("{sol}", &sol.to_string_lossy())
        };
        debug!("running external solver {program}");
        let output = Command::new(substitute(program))
            .args(args.iter().map(|a| substitute(a)))
            .output()
            .map_err(|e| MpcError::External(format!("cannot run `{program}`: {e}")))?;
        if !output.status.success() {
            return Err(MpcError::External(format!(
                "`{program}` exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = std::fs::read_to_string(&sol)
            .map_err(|e| MpcError::External(format!("no solution file from `{program}`: {e}")))?;
        Ok(lp_format::read_solution(&text, problem)?)
    }
}
