//! Road graph and its time/charge expansion.
//!
//! The expanded graph is a directed multigraph over (location, time, charge)
//! nodes. Arcs are travel (including self-loops), idle (one step forward in
//! time at the same charge), or charge (one step forward gaining an integer
//! number of charge units, one parallel arc per throttled rate).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("road arc {origin}->{dest} needs {units} charge units but only {usable} are usable")]
    InfeasibleArc {
        origin: usize,
        dest: usize,
        units: usize,
        usable: usize,
    },
    #[error("expanded graph has no feasible arcs")]
    EmptyGraph,
    #[error("arc is not a charge arc")]
    NonChargeArc,
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub name: String,
    pub is_passthrough: bool,
    #[serde(default)]
    pub distance_offset_km: f64,
    #[serde(default)]
    pub time_offset_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadArc {
    pub origin: usize,
    pub dest: usize,
    pub distance_km: f64,
    pub travel_time_min: f64,
    /// Derived at load time as distance × vehicle efficiency.
    pub energy_kwh: f64,
}

#[derive(Debug, Clone)]
pub struct RoadGraph {
    pub locations: Vec<Location>,
    pub arcs: Vec<RoadArc>,
}

impl RoadGraph {
    /// Checks dense unique ids and arc endpoint validity.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (i, loc) in self.locations.iter().enumerate() {
            if loc.id != i {
                return Err(GraphError::Invalid {
                    what: "location ids",
                    why: format!("expected dense id {i}, found {}", loc.id),
                });
            }
            if loc.distance_offset_km < 0.0 || loc.time_offset_min < 0.0 {
                return Err(GraphError::Invalid {
                    what: "location offsets",
                    why: format!("negative offset at location {}", loc.id),
                });
            }
        }
        for arc in &self.arcs {
            if arc.origin >= self.locations.len() || arc.dest >= self.locations.len() {
                return Err(GraphError::Invalid {
                    what: "road arc endpoints",
                    why: format!("{}->{} out of range", arc.origin, arc.dest),
                });
            }
            if arc.travel_time_min <= 0.0 {
                return Err(GraphError::Invalid {
                    what: "road arc travel time",
                    why: format!("{}->{} has non-positive travel time", arc.origin, arc.dest),
                });
            }
            if arc.distance_km < 0.0 || arc.energy_kwh < 0.0 {
                return Err(GraphError::Invalid {
                    what: "road arc attributes",
                    why: format!("{}->{} has negative distance or energy", arc.origin, arc.dest),
                });
            }
        }
        Ok(())
    }

    pub fn find_arc(&self, origin: usize, dest: usize) -> Option<usize> {
        self.arcs
            .iter()
            .position(|a| a.origin == origin && a.dest == dest)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Discretization {
    /// Time step Δt in minutes.
    pub dt_min: f64,
    /// Number of time steps; indices run 1..=n_t.
    pub n_t: usize,
    /// Charge unit e in kWh.
    pub unit_kwh: f64,
    /// Number of charge levels; indices run 1..=n_c.
    pub n_c: usize,
}

impl Discretization {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.dt_min > 0.0) || !(self.unit_kwh > 0.0) || self.n_t < 2 || self.n_c < 2 {
            return Err(GraphError::Invalid {
                what: "discretization",
                why: format!(
                    "dt_min={}, n_t={}, unit_kwh={}, n_c={}",
                    self.dt_min, self.n_t, self.unit_kwh, self.n_c
                ),
            });
        }
        Ok(())
    }

    pub fn dt_hours(&self) -> f64 {
        self.dt_min / 60.0
    }
}

/// Which side of the meter the charging efficiency is accounted on.
/// `Grid` (default): battery gains the nominal arc energy, the grid supplies
/// nominal/η. `Battery`: losses are assumed upstream of the meter, so grid
/// quantities equal battery quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EfficiencySide {
    #[default]
    Grid,
    Battery,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub battery_kwh: f64,
    pub efficiency_wh_per_km: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub max_charge_kw: f64,
    pub charge_efficiency: f64,
    #[serde(default)]
    pub efficiency_side: EfficiencySide,
}

impl VehicleSpec {
    pub fn usable_kwh(&self) -> f64 {
        (self.soc_max - self.soc_min) * self.battery_kwh
    }

    /// Default charge-level count: one level per unit of usable energy plus
    /// the empty level.
    pub fn default_n_c(&self, unit_kwh: f64) -> usize {
        ceil_units(self.usable_kwh() / unit_kwh) + 1
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let ok = self.battery_kwh > 0.0
            && self.efficiency_wh_per_km > 0.0
            && (0.0..1.0).contains(&self.soc_min)
            && self.soc_max > self.soc_min
            && self.soc_max <= 1.0
            && self.max_charge_kw > 0.0
            && self.charge_efficiency > 0.0
            && self.charge_efficiency <= 1.0;
        if !ok {
            return Err(GraphError::Invalid {
                what: "vehicle spec",
                why: format!("{self:?}"),
            });
        }
        Ok(())
    }

    /// Grid-side energy drawn for a given battery-side energy.
    pub fn grid_energy_kwh(&self, battery_kwh: f64) -> f64 {
        match self.efficiency_side {
            EfficiencySide::Grid => battery_kwh / self.charge_efficiency,
            EfficiencySide::Battery => battery_kwh,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargerCatalog {
    /// Available per-plug rates in kW, strictly increasing.
    pub rates_kw: Vec<f64>,
    /// Horizon-scaled procurement price per plug, one entry per rate.
    pub cost_per_plug_horizon_usd: Vec<f64>,
}

impl ChargerCatalog {
    pub fn empty() -> Self {
        ChargerCatalog {
            rates_kw: Vec::new(),
            cost_per_plug_horizon_usd: Vec::new(),
        }
    }

    pub fn n_rates(&self) -> usize {
        self.rates_kw.len()
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.rates_kw.len() != self.cost_per_plug_horizon_usd.len() {
            return Err(GraphError::Invalid {
                what: "charger catalog",
                why: "rates and prices differ in length".into(),
            });
        }
        if !self.rates_kw.windows(2).all(|w| w[0] < w[1]) || self.rates_kw.iter().any(|r| *r <= 0.0)
        {
            return Err(GraphError::Invalid {
                what: "charger catalog",
                why: "rates must be positive and strictly increasing".into(),
            });
        }
        if self.cost_per_plug_horizon_usd.iter().any(|p| *p < 0.0) {
            return Err(GraphError::Invalid {
                what: "charger catalog",
                why: "plug prices must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExpNode {
    pub loc: usize,
    /// 1-based time index.
    pub t: usize,
    /// 1-based charge level.
    pub c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArcKind {
    Travel { road_arc: usize },
    Idle,
    Charge { units: usize, rate_class: usize },
}

impl ArcKind {
    pub fn is_travel(&self) -> bool {
        matches!(self, ArcKind::Travel { .. })
    }
    pub fn is_charge(&self) -> bool {
        matches!(self, ArcKind::Charge { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpArc {
    pub tail: ExpNode,
    pub head: ExpNode,
    pub kind: ArcKind,
    pub distance_km: f64,
    pub battery_energy_kwh: f64,
    pub grid_energy_kwh: f64,
}

#[derive(Debug, Clone)]
pub struct ExpandedGraph {
    pub arcs: Vec<ExpArc>,
    pub n_locs: usize,
    pub disc: Discretization,
    /// Locations at which charge arcs were generated.
    pub charger_locs: Vec<bool>,
}

impl ExpandedGraph {
    pub fn node_count(&self) -> usize {
        self.n_locs * self.disc.n_t * self.disc.n_c
    }

    pub fn node_index(&self, n: ExpNode) -> usize {
        (n.loc * self.disc.n_t + (n.t - 1)) * self.disc.n_c + (n.c - 1)
    }
}

/// Ceil to integer units with a small absolute guard against values that are
/// an ulp above an exact multiple.
pub(crate) fn ceil_units(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn floor_units(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Rounds a road arc onto the time/charge grid: conservative ceil rounding
/// with a one-step floor, and a one-unit floor for positive-distance arcs.
pub fn discretize_road_arc(
    arc: &RoadArc,
    disc: &Discretization,
) -> Result<(usize, usize), GraphError> {
    let steps = ceil_units(arc.travel_time_min / disc.dt_min).max(1);
    let mut units = ceil_units(arc.energy_kwh / disc.unit_kwh);
    if arc.distance_km > 0.0 {
        units = units.max(1);
    }
    if units > disc.n_c - 1 {
        return Err(GraphError::InfeasibleArc {
            origin: arc.origin,
            dest: arc.dest,
            units,
            usable: disc.n_c - 1,
        });
    }
    Ok((steps, units))
}

/// Battery- and grid-side power of a charge arc in kW. Charge arcs span
/// exactly one step, so power = energy / Δt.
pub fn charge_arc_powers(
    arc: &ExpArc,
    veh: &VehicleSpec,
    disc: &Discretization,
) -> Result<(f64, f64), GraphError> {
    match arc.kind {
        ArcKind::Charge { .. } => {
            let battery_kw = arc.battery_energy_kwh / disc.dt_hours();
            Ok((battery_kw, veh.grid_energy_kwh(battery_kw)))
        }
        _ => Err(GraphError::NonChargeArc),
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Allow charge arcs at pass-through locations. Default false.
    pub chargers_at_passthrough: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            chargers_at_passthrough: false,
        }
    }
}

/// Builds the expanded multigraph. Arcs are emitted in canonical order:
/// by tail node (loc, t, c), then kind (travel, idle, charge), then road-arc
/// id / charge units. The result is identical regardless of parallelism.
pub fn build_expanded_graph(
    road: &RoadGraph,
    disc: &Discretization,
    veh: &VehicleSpec,
    cat: &ChargerCatalog,
    opts: &BuildOptions,
) -> Result<ExpandedGraph, GraphError> {
    build_expanded_graph_inner(road, disc, veh, cat, opts, true)
}

/// Sequential variant of [`build_expanded_graph`]; used by the benchmarks.
pub fn build_expanded_graph_sequential(
    road: &RoadGraph,
    disc: &Discretization,
    veh: &VehicleSpec,
    cat: &ChargerCatalog,
    opts: &BuildOptions,
) -> Result<ExpandedGraph, GraphError> {
    build_expanded_graph_inner(road, disc, veh, cat, opts, false)
}

fn build_expanded_graph_inner(
    road: &RoadGraph,
    disc: &Discretization,
    veh: &VehicleSpec,
    cat: &ChargerCatalog,
    opts: &BuildOptions,
    parallel: bool,
) -> Result<ExpandedGraph, GraphError> {
    road.validate()?;
    disc.validate()?;
    veh.validate()?;
    cat.validate()?;

    let discretized: Vec<(usize, usize)> = road
        .arcs
        .iter()
        .map(|a| discretize_road_arc(a, disc))
        .collect::<Result<_, _>>()?;

    let charger_locs: Vec<bool> = road
        .locations
        .iter()
        .map(|l| opts.chargers_at_passthrough || !l.is_passthrough)
        .collect();

    // Max charge units per step, capped on the battery side by both the
    // fastest plug and the vehicle's own limit.
    let max_units = if cat.rates_kw.is_empty() {
        0
    } else {
        let cap_kw = cat.rates_kw.last().unwrap().min(veh.max_charge_kw);
        floor_units(cap_kw * disc.dt_hours() / disc.unit_kwh)
    };

    // Smallest catalog rate at or above the battery-side power of k units.
    let rate_class_of = |k: usize| -> Option<usize> {
        let battery_kw = k as f64 * disc.unit_kwh / disc.dt_hours();
        cat.rates_kw.iter().position(|r| *r + 1e-9 >= battery_kw)
    };

    let n_t = disc.n_t;
    let n_c = disc.n_c;
    let slice = |t: usize| -> Vec<ExpArc> {
        let mut arcs = Vec::new();
        for loc in 0..road.locations.len() {
            for c in 1..=n_c {
                let tail = ExpNode { loc, t, c };
                // Travel arcs out of (loc, t, c), canonical by road arc id.
                for (rid, ra) in road.arcs.iter().enumerate() {
                    if ra.origin != loc {
                        continue;
                    }
                    let (steps, units) = discretized[rid];
                    if t + steps > n_t || c <= units {
                        continue;
                    }
                    arcs.push(ExpArc {
                        tail,
                        head: ExpNode {
                            loc: ra.dest,
                            t: t + steps,
                            c: c - units,
                        },
                        kind: ArcKind::Travel { road_arc: rid },
                        distance_km: ra.distance_km,
                        battery_energy_kwh: units as f64 * disc.unit_kwh,
                        grid_energy_kwh: 0.0,
                    });
                }
                if t < n_t {
                    arcs.push(ExpArc {
                        tail,
                        head: ExpNode { loc, t: t + 1, c },
                        kind: ArcKind::Idle,
                        distance_km: 0.0,
                        battery_energy_kwh: 0.0,
                        grid_energy_kwh: 0.0,
                    });
                    if charger_locs[loc] {
                        for k in 1..=max_units {
                            if c + k > n_c {
                                break;
                            }
                            let Some(rate_class) = rate_class_of(k) else {
                                break;
                            };
                            let battery = k as f64 * disc.unit_kwh;
                            arcs.push(ExpArc {
                                tail,
                                head: ExpNode {
                                    loc,
                                    t: t + 1,
                                    c: c + k,
                                },
                                kind: ArcKind::Charge {
                                    units: k,
                                    rate_class,
                                },
                                distance_km: 0.0,
                                battery_energy_kwh: battery,
                                grid_energy_kwh: veh.grid_energy_kwh(battery),
                            });
                        }
                    }
                }
            }
        }
        arcs
    };

    let per_slice: Vec<Vec<ExpArc>> = if parallel {
        par::map_collect((1..=n_t).collect::<Vec<_>>(), slice)
    } else {
        (1..=n_t).map(slice).collect()
    };
    let arcs: Vec<ExpArc> = per_slice.into_iter().flatten().collect();
    if arcs.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    Ok(ExpandedGraph {
        arcs,
        n_locs: road.locations.len(),
        disc: *disc,
        charger_locs,
    })
}
