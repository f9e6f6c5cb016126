use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::metrics::Metrics;
use super::run::Trace;
use super::SimError;

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One row per step: arrivals, actions, queue length, average wait, mean
/// charge and the solver's objective and node count when present.
pub fn write_series_csv<W: Write>(trace: &Trace, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "time",
        "arrivals",
        "pickups",
        "rebalances",
        "waiting",
        "avg_wait",
        "mean_charge",
        "objective",
        "nodes",
    ])?;
    for s in &trace.steps {
        w.write_record([
            s.time.to_string(),
            s.arrivals.to_string(),
            s.pickups.to_string(),
            s.rebalances.to_string(),
            s.waiting.to_string(),
            s.avg_wait.to_string(),
            opt(s.mean_charge),
            opt(s.solver.as_ref().map(|d| d.objective)),
            opt(s.solver.as_ref().map(|d| d.nodes)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Waiting customers per station, starting with the initial state at time 0.
pub fn write_station_csv<W: Write>(trace: &Trace, out: W) -> Result<(), SimError> {
    let n = trace.initial.n_stations();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend((0..n).map(|i| format!("station_{i}")));
    w.write_record(&header)?;
    let mut row = vec!["0".to_string()];
    row.extend((0..n).map(|i| trace.initial.waiting_at(i).to_string()));
    w.write_record(&row)?;
    for s in &trace.steps {
        let mut row = vec![(s.time + 1).to_string()];
        row.extend(s.waiting_by_station.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Charge per vehicle, starting with the initial state at time 0. Writes
/// only a header when the run has no batteries.
pub fn write_charge_csv<W: Write>(trace: &Trace, out: W) -> Result<(), SimError> {
    let m = trace.initial.fleet_size();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend((0..m).map(|k| format!("vehicle_{k}")));
    w.write_record(&header)?;
    if let Some(q) = &trace.initial.charges {
        let mut row = vec!["0".to_string()];
        row.extend(q.iter().map(|c| c.to_f64().to_string()));
        w.write_record(&row)?;
        for s in &trace.steps {
            let mut row = vec![(s.time + 1).to_string()];
            row.extend(s.charges.iter().flatten().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_requests_csv<W: Write>(trace: &Trace, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "origin", "dest", "arrival", "pickup", "vehicle", "wait"])?;
    for r in &trace.requests {
        w.write_record([
            r.id.to_string(),
            r.origin.to_string(),
            r.dest.to_string(),
            r.arrival.to_string(),
            opt(r.pickup),
            opt(r.vehicle),
            opt(r.pickup.map(|p| p - r.arrival)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_json<W: Write>(metrics: &Metrics, mut out: W) -> Result<(), SimError> {
    serde_json::to_writer_pretty(&mut out, metrics)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `<prefix>series.csv`, `stations.csv`, `charges.csv`,
/// `requests.csv` and `metrics.json` into `dir`.
pub fn write_trace_files(trace: &Trace, metrics: &Metrics, dir: &Path, prefix: &str) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| -> Result<BufWriter<File>, SimError> {
        Ok(BufWriter::new(File::create(dir.join(format!("{prefix}{name}")))?))
    };
    write_series_csv(trace, file("series.csv")?)?;
    write_station_csv(trace, file("stations.csv")?)?;
    write_charge_csv(trace, file("charges.csv")?)?;
    write_requests_csv(trace, file("requests.csv")?)?;
    let mut m = file("metrics.json")?;
    write_metrics_json(metrics, &mut m)?;
    m.flush()?;
    Ok(())
}
