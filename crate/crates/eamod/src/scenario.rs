//! Scenario configuration: a single TOML file referencing the locations,
//! road, demand, and (optionally) plug CSVs, plus all model parameters.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::load_plugs_csv;
use crate::analysis::scale_baseline;
use crate::demand::{load_demand_csv, DemandTable};
use crate::lpcore::Mode;
use crate::netgraph::{
    BuildOptions, ChargerCatalog, Discretization, Location, RoadArc, RoadGraph,
    VehicleSpec,
};
use crate::solver::SolverConfig;
use crate::tariff::{
    build_tou, fleet_price_per_horizon, rescale_monthly_demand_charge, TariffSet, TouWindow,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Demand(#[from] crate::demand::DemandError),
    #[error(transparent)]
    Graph(#[from] crate::netgraph::GraphError),
    #[error(transparent)]
    Tariff(#[from] crate::tariff::TariffError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub paths: PathsConfig,
    pub discretization: DiscretizationConfig,
    pub vehicle: VehicleSpec,
    pub chargers: ChargersConfig,
    pub tariff: TariffConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub locations: PathBuf,
    pub roads: PathBuf,
    /// Hourly demand CSV `origin,dest,hour,volume`.
    pub demand: Option<PathBuf>,
    /// Step-resolution demand CSV `origin,dest,step,volume`.
    pub demand_steps: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub dt_min: f64,
    pub n_t: usize,
    pub unit_kwh: f64,
    /// Charge-level count override; derived from the vehicle's usable energy
    /// when omitted.
    pub n_c: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargersConfig {
    pub rates_kw: Vec<f64>,
    pub cost_per_plug_horizon_usd: Vec<f64>,
    /// Allow charging arcs at pass-through locations.
    #[serde(default)]
    pub at_passthrough: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffConfig {
    #[serde(default)]
    pub tou_windows: Vec<TouWindow>,
    pub default_energy_price_usd_per_kwh: f64,
    /// Either a direct horizon-scaled value...
    pub demand_charge_usd_per_kw: Option<f64>,
    /// ...or the monthly block quote to rescale.
    pub demand_charge: Option<DemandChargeConfig>,
    pub maintenance_usd_per_km: f64,
    pub fleet_usd_per_vehicle_horizon: Option<f64>,
    pub fleet: Option<FleetPriceConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandChargeConfig {
    pub usd_per_block: f64,
    pub block_kw: f64,
    pub horizon_days: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetPriceConfig {
    pub sale_usd: f64,
    pub depreciation_per_year: f64,
    pub fixed_annual_usd: f64,
    pub horizon_days: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default)]
    pub kind: ModeKind,
    /// Baseline plug layout CSV `loc,rate_kw,plugs`.
    pub plugs_file: Option<PathBuf>,
    /// Optional capacity target; the plug layout is scaled to reach it.
    pub target_capacity_kw: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    #[default]
    Joint,
    Baseline,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iters: usize,
    pub scaling: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            feasibility_tol: d.feasibility_tol,
            optimality_tol: d.optimality_tol,
            max_iters: d.max_iters,
            scaling: d.scaling,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

/// Everything a run needs, resolved and validated.
pub struct Scenario {
    pub road: RoadGraph,
    pub disc: Discretization,
    pub vehicle: VehicleSpec,
    pub catalog: ChargerCatalog,
    pub tariff: TariffSet,
    pub demand: DemandTable,
    pub mode: Mode,
    pub build_opts: BuildOptions,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
}

fn read_to_string(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Deserialize)]
struct LocationRow {
    id: usize,
    name: String,
    is_passthrough: bool,
    #[serde(default)]
    distance_offset_km: f64,
    #[serde(default)]
    time_offset_min: f64,
}

#[derive(Debug, Deserialize)]
struct RoadRow {
    origin: usize,
    dest: usize,
    distance_km: f64,
    travel_time_min: f64,
}

/// Loads the road graph. Pass-through offsets are folded into the attributes
/// of every arc touching a pass-through location, and arc energy is derived
/// from the (offset-adjusted) distance and the vehicle efficiency.
pub fn load_road_graph(
    locations_csv: &Path,
    roads_csv: &Path,
    vehicle: &VehicleSpec,
) -> Result<RoadGraph, ScenarioError> {
    let mut locations = Vec::new();
    let mut rdr =
        csv::Reader::from_path(locations_csv).map_err(|e| ScenarioError::Csv {
            path: locations_csv.to_path_buf(),
            message: e.to_string(),
        })?;
    for rec in rdr.deserialize::<LocationRow>() {
        let r = rec.map_err(|e| ScenarioError::Csv {
            path: locations_csv.to_path_buf(),
            message: e.to_string(),
        })?;
        locations.push(Location {
            id: r.id,
            name: r.name,
            is_passthrough: r.is_passthrough,
            distance_offset_km: r.distance_offset_km,
            time_offset_min: r.time_offset_min,
        });
    }
    locations.sort_by_key(|l| l.id);

    let mut arcs = Vec::new();
    let mut rdr = csv::Reader::from_path(roads_csv).map_err(|e| ScenarioError::Csv {
        path: roads_csv.to_path_buf(),
        message: e.to_string(),
    })?;
    for rec in rdr.deserialize::<RoadRow>() {
        let r = rec.map_err(|e| ScenarioError::Csv {
            path: roads_csv.to_path_buf(),
            message: e.to_string(),
        })?;
        for loc in [r.origin, r.dest] {
            if loc >= locations.len() {
                return Err(ScenarioError::Csv {
                    path: roads_csv.to_path_buf(),
                    message: format!("arc endpoint {loc} is not a known location"),
                });
            }
        }
        let mut distance_km = r.distance_km;
        let mut travel_time_min = r.travel_time_min;
        for loc in [r.origin, r.dest] {
            distance_km += locations[loc].distance_offset_km;
            travel_time_min += locations[loc].time_offset_min;
        }
        arcs.push(RoadArc {
            origin: r.origin,
            dest: r.dest,
            distance_km,
            travel_time_min,
            energy_kwh: distance_km * vehicle.efficiency_wh_per_km / 1000.0,
        });
    }
    let graph = RoadGraph { locations, arcs };
    graph.validate()?;
    Ok(graph)
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    /// Resolves relative paths against the config file's directory and loads
    /// all inputs.
    pub fn load(self, config_dir: &Path) -> Result<Scenario, ScenarioError> {
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                config_dir.join(p)
            }
        };

        self.vehicle.validate()?;
        let catalog = ChargerCatalog {
            rates_kw: self.chargers.rates_kw.clone(),
            cost_per_plug_horizon_usd: self.chargers.cost_per_plug_horizon_usd.clone(),
        };
        catalog.validate()?;

        let road = load_road_graph(
            &resolve(&self.paths.locations),
            &resolve(&self.paths.roads),
            &self.vehicle,
        )?;

        let disc = Discretization {
            dt_min: self.discretization.dt_min,
            n_t: self.discretization.n_t,
            unit_kwh: self.discretization.unit_kwh,
            n_c: self
                .discretization
                .n_c
                .unwrap_or_else(|| self.vehicle.default_n_c(self.discretization.unit_kwh)),
        };
        disc.validate()?;

        let demand = match (&self.paths.demand, &self.paths.demand_steps) {
            (Some(p), None) => load_demand_csv(&resolve(p), &road, &disc, true)?,
            (None, Some(p)) => load_demand_csv(&resolve(p), &road, &disc, false)?,
            (Some(_), Some(_)) => {
                return Err(ScenarioError::Config(
                    "give either paths.demand or paths.demand_steps, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ScenarioError::Config(
                    "no demand file configured (paths.demand or paths.demand_steps)".into(),
                ))
            }
        };

        let demand_charge = match (
            self.tariff.demand_charge_usd_per_kw,
            &self.tariff.demand_charge,
        ) {
            (Some(v), None) => v,
            (None, Some(d)) => {
                rescale_monthly_demand_charge(d.usd_per_block, d.block_kw, d.horizon_days)
            }
            _ => {
                return Err(ScenarioError::Config(
                    "give exactly one of tariff.demand_charge_usd_per_kw or tariff.demand_charge"
                        .into(),
                ))
            }
        };
        let fleet_price = match (self.tariff.fleet_usd_per_vehicle_horizon, &self.tariff.fleet) {
            (Some(v), None) => v,
            (None, Some(f)) => fleet_price_per_horizon(
                f.sale_usd,
                f.depreciation_per_year,
                f.fixed_annual_usd,
                f.horizon_days,
            ),
            _ => {
                return Err(ScenarioError::Config(
                    "give exactly one of tariff.fleet_usd_per_vehicle_horizon or tariff.fleet"
                        .into(),
                ))
            }
        };
        let tariff = TariffSet {
            tou: build_tou(
                &self.tariff.tou_windows,
                self.tariff.default_energy_price_usd_per_kwh,
                &disc,
            ),
            demand_charge_usd_per_kw: demand_charge,
            maintenance_usd_per_km: self.tariff.maintenance_usd_per_km,
            fleet_usd_per_vehicle_horizon: fleet_price,
            station_usd_per_plug_horizon: catalog.cost_per_plug_horizon_usd.clone(),
        };
        tariff.validate(disc.n_t, catalog.n_rates())?;

        let mode = match self.mode.kind {
            ModeKind::Joint => Mode::Joint,
            ModeKind::Baseline => {
                let plugs_file = self.mode.plugs_file.as_ref().ok_or_else(|| {
                    ScenarioError::Config("baseline mode needs mode.plugs_file".into())
                })?;
                let mut plugs =
                    load_plugs_csv(&resolve(plugs_file), road.locations.len(), &catalog)?;
                if let Some(target) = self.mode.target_capacity_kw {
                    plugs = scale_baseline(plugs, catalog.rates_kw.clone(), target)?.plugs;
                }
                Mode::Baseline(plugs)
            }
        };

        Ok(Scenario {
            road,
            disc,
            vehicle: self.vehicle,
            catalog,
            tariff,
            demand,
            mode,
            build_opts: BuildOptions {
                chargers_at_passthrough: self.chargers.at_passthrough,
            },
            solver: SolverConfig {
                feasibility_tol: self.solver.feasibility_tol,
                optimality_tol: self.solver.optimality_tol,
                max_iters: self.solver.max_iters,
                scaling: self.solver.scaling,
            },
            out_dir: resolve(&self.output.dir),
        })
    }
}

// EfficiencySide is configured inside [vehicle]; re-export for config docs.
pub use crate::netgraph::EfficiencySide as ConfiguredEfficiencySide;
