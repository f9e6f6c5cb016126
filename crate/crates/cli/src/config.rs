//! Run configuration: a TOML document naming a scenario file, the
//! controllers to run, the solver, the output directory and the seeds.

use std::path::{Path, PathBuf};
use std::time::Duration;

use amod_core::dispatch::ControllerKind;
use amod_core::mpc::{ExternalSolver, SolverBackend};
use amod_core::sim::Scenario;
use amod_milp::SolverParams;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario JSON, relative to the config file.
    pub scenario: PathBuf,
    #[serde(default)]
    pub controllers: Vec<ControllerKind>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Output directory, relative to the config file.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Empty means the scenario's own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Step budget; replaces the scenario duration when set.
    pub steps: Option<u64>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverConfig {
    Builtin {
        #[serde(default = "default_max_nodes")]
        max_nodes: u64,
        #[serde(default = "default_integrality_tol")]
        integrality_tol: f64,
        /// Wall-clock cap per horizon problem. Runs stop being reproducible
        /// once it binds.
        time_limit_seconds: Option<f64>,
    },
    External {
        /// Program and arguments; `{lp}` and `{sol}` name the exchanged files.
        command: Vec<String>,
    },
}

fn default_max_nodes() -> u64 {
    SolverParams::default().max_nodes
}

fn default_integrality_tol() -> f64 {
    SolverParams::default().integrality_tol
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::Builtin {
            max_nodes: default_max_nodes(),
            integrality_tol: default_integrality_tol(),
            time_limit_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverChoice {
    Builtin,
    External,
}

impl SolverConfig {
    /// Applies a `--solver` override. Switching to the external solver
    /// needs its command from the config.
    pub fn select(self, choice: Option<SolverChoice>) -> Result<SolverConfig, CliError> {
        match (choice, self) {
            (None, s) => Ok(s),
            (Some(SolverChoice::Builtin), s @ SolverConfig::Builtin { .. }) => Ok(s),
            (Some(SolverChoice::Builtin), SolverConfig::External { .. }) => Ok(SolverConfig::default()),
            (Some(SolverChoice::External), s @ SolverConfig::External { .. }) => Ok(s),
            (Some(SolverChoice::External), SolverConfig::Builtin { .. }) => Err(CliError::Config(
                "solver: --solver external needs [solver] kind = \"external\" with a command".into(),
            )),
        }
    }

    pub fn backend(&self) -> Result<SolverBackend, CliError> {
        match self {
            SolverConfig::Builtin {
                max_nodes,
                integrality_tol,
                time_limit_seconds,
            } => {
                let time_limit = match time_limit_seconds {
                    None => None,
                    Some(s) if s.is_finite() && *s > 0.0 => Some(Duration::from_secs_f64(*s)),
                    Some(s) => {
                        return Err(CliError::Config(format!("solver.time_limit_seconds: must be positive, got {s}")))
                    }
                };
                let params = SolverParams {
                    max_nodes: *max_nodes,
                    integrality_tol: *integrality_tol,
                    time_limit,
                    ..SolverParams::default()
                };
                params
                    .validate()
                    .map_err(|e| CliError::Config(format!("solver: {e}")))?;
                Ok(SolverBackend::Builtin(params))
            }
            SolverConfig::External { command } => {
                if command.is_empty() {
                    return Err(CliError::Config("solver.command: must name a program".into()));
                }
                Ok(SolverBackend::External(ExternalSolver { command: command.clone() }))
            }
        }
    }
}

/// A parsed config with its paths resolved and its scenario loaded.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub out: PathBuf,
}

impl Loaded {
    pub fn seeds(&self) -> Vec<u64> {
        if self.config.seeds.is_empty() {
            vec![self.scenario.seed]
        } else {
            self.config.seeds.clone()
        }
    }

    /// The scenario with `seed` drawing its arrivals.
    pub fn scenario_for(&self, seed: u64) -> Scenario {
        let mut s = self.scenario.clone();
        s.seed = seed;
        if let Some(steps) = self.config.steps {
            s.duration = steps;
        }
        s
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = parse_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let scenario_path = base.join(&config.scenario);
    let scenario: Scenario = read_json(&scenario_path).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    scenario
        .validate()
        .map_err(|e| CliError::Config(format!("scenario: {}: {e}", scenario_path.display())))?;
    if config.steps == Some(0) {
        return Err(CliError::Config("steps: must be at least 1".into()));
    }
    for (i, c) in config.controllers.iter().enumerate() {
        c.validate()
            .map_err(|e| CliError::Config(format!("controllers[{i}]: {e}")))?;
    }
    let out = base.join(&config.out);
    Ok(Loaded { config, scenario, out })
}

/// Deserializes TOML, naming the offending key path on failure.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = toml::Deserializer::parse(text).map_err(|e| e.to_string())?;
    serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {}", e.path(), e.inner().message()))
}

/// Reads a JSON file, naming the offending key path on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| format!("{}: {}: {}", path.display(), e.path(), e.inner()))
}
