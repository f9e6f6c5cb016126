use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amod_milp::{lp_format, solve_milp, SolverParams};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn amod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amod")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes `body` as a config in `dir` whose scenario is the repository's
/// regulation example unless `body` names another.
fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let scenario = configs().join("regulation_scenario.json");
    let text = if body.contains("scenario =") {
        body.to_string()
    } else {
        format!("scenario = {:?}\n{body}", scenario.to_str().unwrap())
    };
    fs::write(&path, text).unwrap();
    path
}

const MPCF: &str = "[[controllers]]\nkind = \"mpcf\"\n[controllers.mpc]\nhorizon = 2\n";

#[test]
fn regulate_empties_the_example_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = amod(&[
        "regulate",
        configs().join("regulate.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let stations = fs::read_to_string(out.join("regulate_stations.csv")).unwrap();
    let last = stations.lines().last().unwrap();
    assert!(last.split(',').skip(1).all(|c| c == "0"), "{last}");
    assert!(out.join("regulate_charges.csv").exists());
}

#[test]
fn regulate_reports_a_missed_step_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("steps = 1\nout = \"out\"\n{MPCF}"));
    let run = amod(&["regulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&run), 1, "{}", stderr(&run));
    assert!(stderr(&run).contains("still waiting"));
}

#[test]
fn regulate_refuses_arrivals() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = configs().join("compare_scenario.json");
    let cfg = config(dir.path(), &format!("scenario = {:?}\n{MPCF}", scenario.to_str().unwrap()));
    let run = amod(&["regulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("zero arrival rates"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[[controllers]]\nkind = \"rr\"\nepoc = 3\n");
    let run = amod(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("controllers"), "{}", stderr(&run));

    let cfg = config(dir.path(), "scenario = \"missing.json\"\n");
    let run = amod(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("missing.json"), "{}", stderr(&run));

    let run = amod(&["simulate", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(code(&run), 2);
}

#[test]
fn external_solver_flag_needs_a_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), MPCF);
    let run = amod(&["regulate", cfg.to_str().unwrap(), "--solver", "external"]);
    assert_eq!(code(&run), 2);
}

#[test]
fn compare_tabulates_one_row_per_controller_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = configs().join("compare_scenario.json");
    let body = format!(
        "scenario = {:?}\nout = \"out\"\nseeds = [3]\n[[controllers]]\nkind = \"nn\"\n[[controllers]]\nkind = \"rr\"\nepoch = 5\n",
        scenario.to_str().unwrap()
    );
    let cfg = config(dir.path(), &body);
    let run = amod(&["compare", cfg.to_str().unwrap()]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let table = fs::read_to_string(dir.path().join("out/comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("controller,peak_wait_seed3,half_peak_seed3"));
    assert!(rows[1].starts_with("NN,") && rows[2].starts_with("RR,"));
    assert!(dir.path().join("out/NN_seed3_series.csv").exists());

    let again = amod(&["compare", cfg.to_str().unwrap()]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read_to_string(dir.path().join("out/comparison.csv")).unwrap(), table);

    let one = config(dir.path(), &format!("scenario = {:?}\n[[controllers]]\nkind = \"nn\"\n", scenario.to_str().unwrap()));
    assert_eq!(code(&amod(&["compare", one.to_str().unwrap()])), 2);
}

#[test]
fn simulate_exports_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = configs().join("compare_scenario.json");
    let body = format!(
        "scenario = {:?}\nout = \"out\"\nseeds = [1, 2]\nsteps = 10\n[[controllers]]\nkind = \"nn\"\n[[controllers]]\nkind = \"nn\"\n",
        scenario.to_str().unwrap()
    );
    let cfg = config(dir.path(), &body);
    let run = amod(&["simulate", cfg.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    for name in ["NN_seed5_metrics.json", "NN-2_seed5_series.csv", "NN-2_seed5_requests.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    assert!(!dir.path().join("out/NN_seed1_metrics.json").exists());
}

fn equilibrium_snapshot(dir: &Path, charged: bool) -> PathBuf {
    let charges = if charged { ", \"charges\": [1.0, 1.0, 1.0, 1.0]" } else { "" };
    let text = format!(
        r#"{{"time": 0, "demand": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]],
            "vehicles": [{{"status": "waiting", "station": 0}}, {{"status": "waiting", "station": 1}},
                         {{"status": "waiting", "station": 2}}, {{"status": "waiting", "station": 3}}]{charges}}}"#
    );
    let path = dir.join(if charged { "charged.json" } else { "state.json" });
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn exported_problem_round_trips_and_imports_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), MPCF);
    let state = equilibrium_snapshot(dir.path(), false);
    let lp = dir.path().join("step.lp");
    let run = amod(&[
        "export-lp",
        cfg.to_str().unwrap(),
        "--state",
        state.to_str().unwrap(),
        "--lp",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));

    let text = fs::read_to_string(&lp).unwrap();
    let problem = lp_format::parse_lp_file(&lp).unwrap();
    assert_eq!(lp_format::to_lp_string(&problem), text);
    let solution = solve_milp(&problem, &SolverParams::default()).unwrap();
    assert!(solution.objective.abs() < 1e-9);

    let sol = dir.path().join("step.sol");
    let mut buf = Vec::new();
    lp_format::write_solution(&solution, &problem, &mut buf).unwrap();
    fs::write(&sol, buf).unwrap();
    let run = amod(&[
        "import-sol",
        cfg.to_str().unwrap(),
        "--state",
        state.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let control: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let actions = control["actions"].as_array().unwrap();
    assert_eq!(actions.len(), 4);
    assert!(actions.iter().all(|a| a["action"] == "hold"));
}

#[test]
fn charged_snapshot_needs_charge_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), MPCF);
    let state = equilibrium_snapshot(dir.path(), true);
    let run = amod(&["export-lp", cfg.to_str().unwrap(), "--state", state.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("charge"), "{}", stderr(&run));
}

#[test]
fn ingest_bins_trip_records() {
    let dir = tempfile::tempdir().unwrap();
    let trips = dir.path().join("trips.csv");
    fs::write(&trips, "pickup_step,origin_station,dest_station\n0,0,1\n1,0,1\n4,1,0\n").unwrap();
    let out = dir.path().join("rates");
    let run = amod(&[
        "ingest",
        "--trips",
        trips.to_str().unwrap(),
        "--stations",
        "2",
        "--bin-width",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let rates: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("rates.json")).unwrap()).unwrap();
    assert_eq!(rates[0]["rates"][0][1], 0.5);
    assert_eq!(rates[1]["start"], 4);
    assert_eq!(rates[1]["rates"][1][0], 0.25);

    let bad = amod(&["ingest", "--trips", "nope.csv", "--stations", "2", "--bin-width", "4"]);
    assert_eq!(code(&bad), 2);
}
