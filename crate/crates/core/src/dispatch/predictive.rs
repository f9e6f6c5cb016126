use rand_chacha::ChaCha8Rng;

use super::{Controller, DecisionContext, DispatchError};
use crate::model::{ArrivalBatch, Control, StationCapacity};
use crate::mpc::{mpc_step, MpcConfig, MpcDiagnostics, SolverBackend};
use crate::sim::generate_arrivals;

/// Where the horizon's future arrivals come from. The current step's
/// arrivals are always the observed ones.
#[derive(Debug, Clone)]
pub enum ForecastMode {
    /// The true future arrivals.
    Oracle,
    /// Poisson draws from the rate schedule, redrawn every `epoch` steps.
    Sampled { epoch: u32, rng: ChaCha8Rng },
}

/// Receding-horizon controller: solves the horizon MILP every step and
/// applies its first control.
#[derive(Debug, Clone)]
pub struct PredictiveController {
    cfg: MpcConfig,
    solver: SolverBackend,
    mode: ForecastMode,
    samples: Vec<ArrivalBatch>,
    sample_start: u64,
    last: Option<MpcDiagnostics>,
}

impl PredictiveController {
    pub fn new(cfg: MpcConfig, solver: SolverBackend, mode: ForecastMode) -> Self {
        PredictiveController {
            cfg,
            solver,
            mode,
            samples: Vec::new(),
            sample_start: 0,
            last: None,
        }
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    fn forecast(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<ArrivalBatch>, DispatchError> {
        let h = self.cfg.horizon as usize;
        let t = ctx.time();
        let mut out = Vec::with_capacity(h);
        out.push(ctx.arrivals.clone());
        match &mut self.mode {
            ForecastMode::Oracle => {
                if ctx.lookahead.len() < h {
                    return Err(DispatchError::Config(format!(
                        "oracle forecast needs {h} batches of lookahead, got {}",
                        ctx.lookahead.len()
                    )));
                }
                out.extend(ctx.lookahead[1..h].iter().cloned());
            }
            ForecastMode::Sampled { epoch, rng } => {
                let covered = t + h as u64 <= self.sample_start + self.samples.len() as u64;
                if self.samples.is_empty() || t % *epoch as u64 == 0 || !covered {
                    let len = *epoch as u64 + h as u64;
                    self.samples = generate_arrivals(ctx.rates, t, len, rng);
                    self.sample_start = t;
                }
                let offset = (t - self.sample_start) as usize;
                out.extend(self.samples[offset + 1..offset + h].iter().cloned());
            }
        }
        Ok(out)
    }
}

impl Controller for PredictiveController {
    fn name(&self) -> &str {
        match self.mode {
            ForecastMode::Oracle => "MPCF",
            ForecastMode::Sampled { .. } => "MPCS",
        }
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Control, DispatchError> {
        let forecast = self.forecast(ctx)?;
        let (control, diagnostics) = mpc_step(ctx.state, &forecast, ctx.net, &self.cfg, ctx.charge, &self.solver)?;
        self.last = Some(diagnostics);
        Ok(control)
    }

    fn lookahead(&self) -> usize {
        match self.mode {
            ForecastMode::Oracle => self.cfg.horizon as usize,
            ForecastMode::Sampled { .. } => 1,
        }
    }

    fn capacity(&self) -> Option<&StationCapacity> {
        self.cfg.capacity.as_ref()
    }

    fn diagnostics(&self) -> Option<&MpcDiagnostics> {
        self.last.as_ref()
    }
}
