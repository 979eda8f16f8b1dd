use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eamod::analysis::{
    self, build_report, extract_solution, load_plugs_csv, scale_baseline, RunReport,
};
use eamod::demand::request_arcs;
use eamod::lpcore::{assemble, export_lp, export_mps};
use eamod::netgraph::{build_expanded_graph, discretize_road_arc, ChargerCatalog, GraphError};
use eamod::scenario::{ModeKind, Scenario, ScenarioConfig, ScenarioError};
use eamod::solver::{solve, verify, SolveError};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "eamod", about = "Joint charging-station siting and fleet operations planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario for structural problems without solving it.
    Validate {
        config: PathBuf,
    },
    /// Build, solve, and report on a scenario.
    Run(RunArgs),
    /// Compare the reports of two finished runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
    },
    /// Scale a plug layout to a target total installed capacity.
    ScaleBaseline {
        /// Scenario config providing the charger catalog.
        config: PathBuf,
        /// Plug layout CSV `loc,rate_kw,plugs`.
        plugs: PathBuf,
        #[arg(long)]
        target_kw: f64,
        /// Output CSV path.
        #[arg(long, default_value = "scaled_plugs.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Write model.lp / model.mps into the output dir and stop.
    #[arg(long)]
    export_only: bool,
    /// Override the configured mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ModeKind>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override both solver tolerances.
    #[arg(long)]
    solver_tol: Option<f64>,
}

fn parse_mode(s: &str) -> Result<ModeKind, String> {
    match s {
        "joint" => Ok(ModeKind::Joint),
        "baseline" => Ok(ModeKind::Baseline),
        other => Err(format!("unknown mode `{other}` (expected joint|baseline)")),
    }
}

fn scenario_exit_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn load_scenario(config: &Path, args: Option<&RunArgs>) -> Result<Scenario, (u8, String)> {
    let mut cfg =
        ScenarioConfig::from_file(config).map_err(|e| (scenario_exit_code(&e), e.to_string()))?;
    if let Some(args) = args {
        if let Some(mode) = args.mode {
            cfg.mode.kind = mode;
        }
        if let Some(out) = &args.out {
            cfg.output.dir = out.clone();
        }
        if let Some(tol) = args.solver_tol {
            cfg.solver.feasibility_tol = tol;
            cfg.solver.optimality_tol = tol;
        }
    }
    let dir = config.parent().unwrap_or(Path::new("."));
    cfg.load(dir).map_err(|e| (scenario_exit_code(&e), e.to_string()))
}

fn cmd_validate(config: &Path) -> Result<(), (u8, String)> {
    let sc = load_scenario(config, None)?;
    let mut errors: Vec<String> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    let mut smallest_trip_kwh = f64::INFINITY;
    for arc in &sc.road.arcs {
        if arc.distance_km > 0.0 {
            smallest_trip_kwh = smallest_trip_kwh.min(arc.energy_kwh);
        }
        if let Err(e @ GraphError::InfeasibleArc { .. }) = discretize_road_arc(arc, &sc.disc) {
            errors.push(e.to_string());
        }
    }
    if smallest_trip_kwh.is_finite() && sc.disc.unit_kwh > smallest_trip_kwh + 1e-12 {
        warnings.push(format!(
            "charge unit {} kWh exceeds the smallest trip energy {:.3} kWh; short trips will be rounded up",
            sc.disc.unit_kwh, smallest_trip_kwh
        ));
    }

    for m in &sc.demand.requests {
        if sc.road.find_arc(m.origin, m.dest).is_none() {
            errors.push(format!(
                "demand on {}->{} but the road graph has no such arc",
                m.origin, m.dest
            ));
        }
    }

    if errors.is_empty() {
        match build_expanded_graph(&sc.road, &sc.disc, &sc.vehicle, &sc.catalog, &sc.build_opts) {
            Ok(graph) => {
                for m in &sc.demand.requests {
                    if request_arcs(&graph, m).is_empty() {
                        errors.push(format!(
                            "request {}->{} at step {} cannot be served by any arc",
                            m.origin, m.dest, m.depart_t
                        ));
                    }
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }

    for w in &warnings {
        println!("warning: {w}");
    }
    for e in &errors {
        println!("error: {e}");
    }
    if errors.is_empty() {
        println!(
            "ok: {} locations, {} road arcs, {} requests ({} vehicles demanded)",
            sc.road.locations.len(),
            sc.road.arcs.len(),
            sc.demand.requests.len(),
            sc.demand.total_volume
        );
        Ok(())
    } else {
        Err((EXIT_VALIDATION, format!("{} validation error(s)", errors.len())))
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), (u8, String)> {
    let sc = load_scenario(&args.config, Some(args))?;
    let graph = build_expanded_graph(&sc.road, &sc.disc, &sc.vehicle, &sc.catalog, &sc.build_opts)
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let model = assemble(&graph, &sc.demand, &sc.tariff, &sc.catalog, &sc.mode)
        .map_err(|e| (EXIT_INFEASIBLE, e.to_string()))?;
    println!(
        "model: {} variables, {} rows ({} arcs)",
        model.n_vars(),
        model.rows.len(),
        graph.arcs.len()
    );

    std::fs::create_dir_all(&sc.out_dir).map_err(|e| (EXIT_IO, e.to_string()))?;
    if args.export_only {
        let lp = sc.out_dir.join("model.lp");
        let mps = sc.out_dir.join("model.mps");
        export_lp(&model, &lp).map_err(|e| (EXIT_IO, e.to_string()))?;
        export_mps(&model, &mps).map_err(|e| (EXIT_IO, e.to_string()))?;
        println!("wrote {} and {}", lp.display(), mps.display());
        return Ok(());
    }

    let (x, stats) = solve(&model, &sc.solver).map_err(|e| match e {
        SolveError::Infeasible { .. } => (EXIT_INFEASIBLE, e.to_string()),
        _ => (EXIT_INFEASIBLE, e.to_string()),
    })?;
    println!(
        "solved: objective {:.6} USD in {:.2?}",
        stats.objective, stats.wall_time
    );

    let report = verify(&model, &x, &sc.solver);
    if !report.ok {
        return Err((
            EXIT_INFEASIBLE,
            format!(
                "solution failed verification: max residual {:.3e}, peak slack {:?}",
                report.max_residual, report.peak_slack
            ),
        ));
    }

    let solution = extract_solution(&model, &graph, &sc.demand, &sc.mode, &x);
    let run_report = build_report(&solution, &sc.tariff, &graph, &sc.catalog);
    analysis::write_reports(&sc.out_dir, &run_report, &graph, &solution)
        .map_err(|e| (EXIT_IO, e.to_string()))?;
    println!(
        "fleet {:.2} vehicles, total cost {:.2} USD, reports in {}",
        run_report.fleet_size,
        run_report.breakdown.total_usd,
        sc.out_dir.display()
    );
    Ok(())
}

fn read_report(dir: &Path) -> Result<RunReport, (u8, String)> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn cmd_compare(run_a: &Path, run_b: &Path) -> Result<(), (u8, String)> {
    let a = read_report(run_a)?;
    let b = read_report(run_b)?;
    println!("{:<24} {:>16} {:>16} {:>10}", "quantity", "run_a", "run_b", "change");
    for row in analysis::compare_reports(&a, &b) {
        println!(
            "{:<24} {:>16.4} {:>16.4} {:>9.2}%",
            row.quantity, row.a, row.b, row.change_pct
        );
    }
    Ok(())
}

fn cmd_scale_baseline(
    config: &Path,
    plugs_path: &Path,
    target_kw: f64,
    out: &Path,
) -> Result<(), (u8, String)> {
    let cfg =
        ScenarioConfig::from_file(config).map_err(|e| (scenario_exit_code(&e), e.to_string()))?;
    let catalog = ChargerCatalog {
        rates_kw: cfg.chargers.rates_kw.clone(),
        cost_per_plug_horizon_usd: cfg.chargers.cost_per_plug_horizon_usd.clone(),
    };
    // the CSV itself bounds the number of locations
    let n_locs = count_locations(plugs_path)?;
    let plugs = load_plugs_csv(plugs_path, n_locs, &catalog)
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let plan = scale_baseline(plugs, catalog.rates_kw.clone(), target_kw)
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let mut text = String::from("loc,rate_kw,plugs\n");
    for (loc, row) in plan.plugs.iter().enumerate() {
        for (r, s) in row.iter().enumerate() {
            if *s > 0.0 {
                text.push_str(&format!("{},{},{:.9}\n", loc, plan.rates_kw[r], s));
            }
        }
    }
    std::fs::write(out, text).map_err(|e| (EXIT_IO, e.to_string()))?;
    println!(
        "scaled to {:.3} kW total capacity, wrote {}",
        plan.total_capacity_kw,
        out.display()
    );
    Ok(())
}

fn count_locations(plugs_path: &Path) -> Result<usize, (u8, String)> {
    let mut rdr = csv::Reader::from_path(plugs_path)
        .map_err(|e| (EXIT_IO, format!("{}: {e}", plugs_path.display())))?;
    let mut max_loc = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
        let loc: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or((EXIT_VALIDATION, "bad loc column in plugs csv".to_string()))?;
        max_loc = max_loc.max(loc);
    }
    Ok(max_loc + 1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Run(args) => cmd_run(args),
        Command::Compare { run_a, run_b } => cmd_compare(run_a, run_b),
        Command::ScaleBaseline {
            config,
            plugs,
            target_kw,
            out,
        } => cmd_scale_baseline(config, plugs, *target_kw, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
