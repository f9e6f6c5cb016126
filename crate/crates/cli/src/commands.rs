use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use amod_core::dispatch::{seeded_rng, ControllerKind, ARRIVAL_STREAM};
use amod_core::model::{ArrivalBatch, SystemState};
use amod_core::mpc::{build_formulation, extract_first_control, Formulation, MpcConfig};
use amod_core::sim::{
    compute_metrics, generate_arrivals, ingest_trip_records_file, run_simulation_with, write_series_csv,
    write_trace_files, Metrics, RunOptions, Scenario, Trace,
};
use amod_milp::lp_format;
use log::info;

use crate::config::{self, Loaded};
use crate::{CliError, Overrides};

fn load(path: &Path, o: &Overrides) -> Result<Loaded, CliError> {
    let mut loaded = config::load(path)?;
    if let Some(seed) = o.seed {
        loaded.config.seeds = vec![seed];
    }
    if let Some(out) = &o.out {
        loaded.out = out.clone();
    }
    loaded.config.solver = loaded.config.solver.clone().select(o.solver)?;
    Ok(loaded)
}

/// Controller labels, with `-2`, `-3`, ... on repeated kinds.
fn names(controllers: &[ControllerKind]) -> Vec<String> {
    controllers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let label = c.label();
            let repeats = controllers[..i].iter().filter(|d| d.label() == label).count();
            if repeats == 0 {
                label.to_string()
            } else {
                format!("{label}-{}", repeats + 1)
            }
        })
        .collect()
}

fn run(
    loaded: &Loaded,
    kind: &ControllerKind,
    seed: u64,
    opts: &RunOptions,
) -> Result<(Trace, Metrics), CliError> {
    let scenario = loaded.scenario_for(seed);
    let backend = loaded.config.solver.backend()?;
    let mut controller = kind
        .build(seed, scenario.charging(), &backend)
        .map_err(|e| CliError::Config(format!("controller {}: {e}", kind.label())))?;
    let trace = run_simulation_with(&scenario, controller.as_mut(), None, opts)?;
    let metrics = compute_metrics(&trace);
    Ok((trace, metrics))
}

fn quiet() -> RunOptions {
    RunOptions {
        stop_when_empty: false,
        keep_states: false,
    }
}

pub fn regulate(path: &Path, o: &Overrides) -> Result<(), CliError> {
    let loaded = load(path, o)?;
    if !loaded.scenario.rates.is_zero() {
        return Err(CliError::Config("scenario.rates: regulate needs zero arrival rates".into()));
    }
    let [kind] = loaded.config.controllers.as_slice() else {
        return Err(CliError::Config("controllers: regulate takes exactly one controller".into()));
    };
    if !kind.is_predictive() {
        return Err(CliError::Config(format!(
            "controllers[0]: regulate needs mpcs or mpcf, got {}",
            kind.label()
        )));
    }
    let seed = loaded.seeds()[0];
    let opts = RunOptions {
        stop_when_empty: true,
        keep_states: false,
    };
    let (trace, metrics) = run(&loaded, kind, seed, &opts)?;
    write_trace_files(&trace, &metrics, &loaded.out, "regulate_")?;
    let steps = trace.steps.len();
    let waiting = trace.final_state.total_waiting();
    if waiting > 0 {
        return Err(CliError::Failed(format!("{waiting} customers still waiting after {steps} steps")));
    }
    println!("{}: no customers waiting after {steps} steps", kind.label());
    Ok(())
}

pub fn simulate(path: &Path, o: &Overrides) -> Result<(), CliError> {
    let loaded = load(path, o)?;
    if loaded.config.controllers.is_empty() {
        return Err(CliError::Config("controllers: simulate needs at least one controller".into()));
    }
    for (name, kind) in names(&loaded.config.controllers).iter().zip(&loaded.config.controllers) {
        for seed in loaded.seeds() {
            let (trace, metrics) = run(&loaded, kind, seed, &quiet())?;
            write_trace_files(&trace, &metrics, &loaded.out, &format!("{name}_seed{seed}_"))?;
            println!(
                "{name} seed {seed}: served {}/{}, peak wait {:.3}, half-peak fraction {:.3}",
                metrics.served, metrics.generated, metrics.peak_wait, metrics.half_peak_fraction
            );
        }
    }
    Ok(())
}

pub fn compare(path: &Path, o: &Overrides) -> Result<(), CliError> {
    let loaded = load(path, o)?;
    let controllers = &loaded.config.controllers;
    if controllers.len() < 2 {
        return Err(CliError::Config("controllers: compare needs at least two controllers".into()));
    }
    let seeds = loaded.seeds();
    std::fs::create_dir_all(&loaded.out)?;
    let mut table = csv::Writer::from_path(loaded.out.join("comparison.csv")).map_err(csv_error)?;
    let mut header = vec!["controller".to_string()];
    for seed in &seeds {
        header.push(format!("peak_wait_seed{seed}"));
        header.push(format!("half_peak_seed{seed}"));
    }
    header.push("mean_peak_wait".into());
    header.push("mean_half_peak".into());
    table.write_record(&header).map_err(csv_error)?;
    for (name, kind) in names(controllers).iter().zip(controllers) {
        let mut row = vec![name.clone()];
        let (mut peak, mut half) = (0.0, 0.0);
        for &seed in &seeds {
            info!("running {name} on seed {seed}");
            // every controller reads the arrivals drawn from the same seed
            let (trace, metrics) = run(&loaded, kind, seed, &quiet())?;
            let file = File::create(loaded.out.join(format!("{name}_seed{seed}_series.csv")))?;
            write_series_csv(&trace, BufWriter::new(file))?;
            row.push(format!("{:.6}", metrics.peak_wait));
            row.push(format!("{:.6}", metrics.half_peak_fraction));
            peak += metrics.peak_wait;
            half += metrics.half_peak_fraction;
        }
        let k = seeds.len() as f64;
        row.push(format!("{:.6}", peak / k));
        row.push(format!("{:.6}", half / k));
        println!("{name}: mean peak wait {:.3}, mean half-peak fraction {:.3}", peak / k, half / k);
        table.write_record(&row).map_err(csv_error)?;
    }
    table.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Failed(e.to_string())
}

/// The horizon problem an MPC controller would build for `snapshot`, with
/// the seed's realized arrivals as the forecast.
fn snapshot_formulation(
    loaded: &Loaded,
    snapshot: &Path,
    controller: usize,
) -> Result<(SystemState, Formulation), CliError> {
    let kind = loaded
        .config
        .controllers
        .get(controller)
        .ok_or_else(|| CliError::Config(format!("controllers[{controller}]: no such controller")))?;
    let cfg: MpcConfig = kind
        .mpc_config()
        .ok_or_else(|| CliError::Config(format!("controllers[{controller}]: {} has no horizon problem", kind.label())))?;
    let state: SystemState = config::read_json(snapshot).map_err(|e| CliError::Config(format!("state: {e}")))?;
    let scenario: Scenario = loaded.scenario_for(loaded.seeds()[0]);
    if state.charges.is_some() && scenario.charge.is_none() {
        return Err(CliError::Config("scenario.charge: the snapshot has charges but no charge parameters are set".into()));
    }
    if cfg.charging_enabled != state.charges.is_some() {
        return Err(CliError::Config(format!(
            "controllers[{controller}].mpc.charging_enabled: is {} but the snapshot {} charges",
            cfg.charging_enabled,
            if state.charges.is_some() { "has" } else { "has no" }
        )));
    }
    let forecast = realized_arrivals(&scenario, state.time, cfg.horizon);
    let f = build_formulation(&state, &forecast, &scenario.network, &cfg, scenario.charge.as_ref())
        .map_err(|e| CliError::Config(format!("state: {e}")))?;
    Ok((state, f))
}

fn realized_arrivals(scenario: &Scenario, from: u64, horizon: u32) -> Vec<ArrivalBatch> {
    let mut rng = seeded_rng(scenario.seed, ARRIVAL_STREAM);
    let mut all = generate_arrivals(&scenario.rates, 0, from + horizon as u64, &mut rng);
    all.split_off(from as usize)
}

pub fn export_lp(
    path: &Path,
    snapshot: &Path,
    controller: usize,
    lp: Option<&Path>,
    o: &Overrides,
) -> Result<(), CliError> {
    let loaded = load(path, o)?;
    let (_, f) = snapshot_formulation(&loaded, snapshot, controller)?;
    let target: PathBuf = lp.map_or_else(|| loaded.out.join("step.lp"), Path::to_path_buf);
    if let Some(dir) = target.parent() {
        std::fs::create_dir_all(dir)?;
    }
    lp_format::write_lp_file(&f.problem, &target).map_err(|e| CliError::Failed(e.to_string()))?;
    println!(
        "wrote {} ({} variables, {} rows)",
        target.display(),
        f.problem.num_variables(),
        f.problem.num_constraints()
    );
    Ok(())
}

pub fn import_sol(
    path: &Path,
    snapshot: &Path,
    controller: usize,
    solution: &Path,
    o: &Overrides,
) -> Result<(), CliError> {
    let loaded = load(path, o)?;
    let (state, f) = snapshot_formulation(&loaded, snapshot, controller)?;
    let text = std::fs::read_to_string(solution)
        .map_err(|e| CliError::Config(format!("cannot read solution {}: {e}", solution.display())))?;
    let sol = lp_format::read_solution(&text, &f.problem).map_err(|e| CliError::Failed(e.to_string()))?;
    if !sol.has_values() {
        return Err(CliError::Failed(format!("solution status {:?} carries no values", sol.status)));
    }
    let control = extract_first_control(&sol, &f, state.time).map_err(|e| CliError::Failed(e.to_string()))?;
    let json = serde_json::to_string_pretty(&control).map_err(|e| CliError::Failed(e.to_string()))?;
    println!("{json}");
    Ok(())
}

pub fn ingest(trips: &Path, stations: usize, bin_width: u64, o: &Overrides) -> Result<(), CliError> {
    if stations == 0 {
        return Err(CliError::Config("--stations: must be at least 1".into()));
    }
    if !trips.exists() {
        return Err(CliError::Config(format!("--trips: {} does not exist", trips.display())));
    }
    let rates = ingest_trip_records_file(trips, stations, bin_width).map_err(|e| CliError::Config(e.to_string()))?;
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let target = out.join("rates.json");
    let mut json = serde_json::to_string_pretty(&rates).map_err(|e| CliError::Failed(e.to_string()))?;
    json.push('\n');
    std::fs::write(&target, json)?;
    println!("wrote {} ({} rate pieces)", target.display(), rates.pieces().len());
    Ok(())
}
