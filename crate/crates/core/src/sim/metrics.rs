use serde::Serialize;

use super::run::Trace;

/// Summary of one run. Waits are in steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub controller: String,
    pub seed: u64,
    pub steps: usize,
    pub generated: usize,
    pub served: usize,
    pub pending: usize,
    /// Largest per-step average wait of unserved customers.
    pub peak_wait: f64,
    /// Share of steps whose average wait is at least half the peak.
    pub half_peak_fraction: f64,
    /// Mean wait over served requests; absent when none was served.
    pub mean_wait: Option<f64>,
    pub max_wait: Option<u64>,
    pub final_waiting: i64,
    pub emptied_at: Option<u64>,
    pub final_mean_charge: Option<f64>,
    pub mean_charge: Option<f64>,
    /// Set when there was nothing to measure: no steps, or no customer
    /// ever waited.
    pub empty: bool,
}

/// Peak of `series` and the fraction of entries at or above half of it.
/// A zero peak has no meaningful half-peak level and yields fraction 0.
pub fn peak_and_half_peak_fraction(series: &[f64]) -> (f64, f64) {
    let peak = series.iter().copied().fold(0.0, f64::max);
    if series.is_empty() || peak <= 0.0 {
        return (peak, 0.0);
    }
    let half = 0.5 * peak;
    let above = series.iter().filter(|&&v| v >= half).count();
    (peak, above as f64 / series.len() as f64)
}

pub fn compute_metrics(trace: &Trace) -> Metrics {
    let series: Vec<f64> = trace.steps.iter().map(|s| s.avg_wait).collect();
    let (peak_wait, half_peak_fraction) = peak_and_half_peak_fraction(&series);
    let waits: Vec<u64> = trace
        .requests
        .iter()
        .filter_map(|r| r.pickup.map(|p| p - r.arrival))
        .collect();
    let served = waits.len();
    let mean_wait = (served > 0).then(|| waits.iter().sum::<u64>() as f64 / served as f64);
    let charges: Vec<f64> = trace.steps.iter().filter_map(|s| s.mean_charge).collect();
    let mean_charge = (!charges.is_empty()).then(|| charges.iter().sum::<f64>() / charges.len() as f64);
    Metrics {
        controller: trace.controller.clone(),
        seed: trace.seed,
        steps: trace.steps.len(),
        generated: trace.requests.len(),
        served,
        pending: trace.requests.len() - served,
        peak_wait,
        half_peak_fraction,
        mean_wait,
        max_wait: waits.iter().copied().max(),
        final_waiting: trace.final_state.total_waiting(),
        emptied_at: trace.emptied_at(),
        final_mean_charge: trace.final_state.mean_charge(),
        mean_charge,
        empty: trace.steps.is_empty() || peak_wait == 0.0,
    }
}
