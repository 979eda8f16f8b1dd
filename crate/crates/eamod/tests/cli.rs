//! End-to-end tests of the `eamod` binary: exit codes, report files, and the
//! export/compare/scale workflows. All scenarios here are tiny so they solve
//! in milliseconds even without optimizations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eamod")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process not killed by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Two connected zones, eight 15-minute steps, one small request each way.
fn write_scenario(dir: &Path) -> PathBuf {
    std::fs::write(
        dir.join("locations.csv"),
        "id,name,is_passthrough,distance_offset_km,time_offset_min\n\
         0,east,false,0.0,0.0\n\
         1,west,false,0.0,0.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("roads.csv"),
        "origin,dest,distance_km,travel_time_min\n\
         0,1,1.0,10.0\n\
         1,0,1.0,10.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("demand_steps.csv"),
        "origin,dest,step,volume\n0,1,2,1.0\n1,0,5,1.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("plugs.csv"),
        "loc,rate_kw,plugs\n0,7.7,2.0\n1,7.7,2.0\n",
    )
    .unwrap();
    let config = dir.join("scenario.toml");
    std::fs::write(
        &config,
        r#"
[paths]
locations = "locations.csv"
roads = "roads.csv"
demand_steps = "demand_steps.csv"

[discretization]
dt_min = 15.0
n_t = 8
unit_kwh = 0.5

[vehicle]
battery_kwh = 10.0
efficiency_wh_per_km = 100.0
soc_min = 0.2
soc_max = 0.8
max_charge_kw = 22.0
charge_efficiency = 0.9

[chargers]
rates_kw = [7.7]
cost_per_plug_horizon_usd = [2.61]

[tariff]
default_energy_price_usd_per_kwh = 0.12
demand_charge_usd_per_kw = 0.05
maintenance_usd_per_km = 0.0464
fleet_usd_per_vehicle_horizon = 20.09

[mode]
kind = "joint"
plugs_file = "plugs.csv"
"#,
    )
    .unwrap();
    config
}

#[test]
fn validate_accepts_a_sound_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let out = run(&["validate", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("ok: 2 locations"));
}

#[test]
fn run_solves_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let out_dir = dir.path().join("run");
    let out = run(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("solved: objective"));
    assert!(out_dir.join("report.json").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert!(report["fleet_size"].as_f64().unwrap() > 0.0);
}

#[test]
fn export_only_writes_model_files_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let out_dir = dir.path().join("export");
    let out = run(&[
        "run",
        config.to_str().unwrap(),
        "--export-only",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out_dir.join("model.lp").is_file());
    assert!(out_dir.join("model.mps").is_file());
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn compare_of_identical_runs_shows_no_change() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["run", config.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    let out = run(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for line in text.lines().skip(1) {
        assert!(
            line.trim_end().ends_with("0.00%"),
            "unexpected change in `{line}`"
        );
    }
}

#[test]
fn baseline_mode_override_uses_the_plug_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let out_dir = dir.path().join("base");
    let out = run(&[
        "run",
        config.to_str().unwrap(),
        "--mode",
        "baseline",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    // four fixed plugs at 2.61 USD each
    let station = report["breakdown"]["station_usd"].as_f64().unwrap();
    assert!((station - 4.0 * 2.61).abs() < 1e-9);
}

#[test]
fn missing_config_exits_with_io_code() {
    let out = run(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn malformed_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&config, text.replace("n_t = 8", "n_t = 8\nbogus_key = 1")).unwrap();
    let out = run(&["validate", config.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn infeasible_scenario_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    // baseline with no plugs anywhere: trips drain charge that can never be
    // replaced, so the periodic model has no feasible flow
    std::fs::write(dir.path().join("plugs.csv"), "loc,rate_kw,plugs\n").unwrap();
    let out = run(&[
        "run",
        config.to_str().unwrap(),
        "--mode",
        "baseline",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        2,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn scale_baseline_scales_every_entry_by_one_factor() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path());
    let scaled = dir.path().join("scaled.csv");
    // current capacity is 4 plugs * 7.7 kW = 30.8 kW; double it
    let out = run(&[
        "scale-baseline",
        config.to_str().unwrap(),
        dir.path().join("plugs.csv").to_str().unwrap(),
        "--target-kw",
        "61.6",
        "--out",
        scaled.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&scaled).unwrap();
    let mut total = 0.0;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let plugs: f64 = fields[2].parse().unwrap();
        assert!((plugs - 4.0).abs() < 1e-9, "expected doubled plugs in `{line}`");
        total += plugs * fields[1].parse::<f64>().unwrap();
    }
    assert!((total - 61.6).abs() < 1e-6);
}
