//! Travel request ingestion and mapping onto expanded-graph arcs.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::netgraph::{ArcKind, Discretization, ExpandedGraph, RoadGraph};

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("time step {dt_min} min does not divide the hour")]
    NonIntegralStepsPerHour { dt_min: f64 },
    #[error("unknown location {loc} in demand row {row}")]
    UnknownLocation { loc: usize, row: usize },
    #[error("demand at step {step} lies outside the horizon 1..={n_t}")]
    StepOutOfHorizon { step: usize, n_t: usize },
    #[error("no arc can serve request {origin}->{dest} departing at step {depart_t}")]
    NoFeasibleArc {
        origin: usize,
        dest: usize,
        depart_t: usize,
    },
    #[error("demand csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub origin: usize,
    pub dest: usize,
    /// 1-based departure time step.
    pub depart_t: usize,
    /// Vehicles requested; fractional volumes are allowed.
    pub volume: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DemandTable {
    pub requests: Vec<Request>,
    pub total_volume: f64,
}

impl DemandTable {
    pub fn from_requests(requests: Vec<Request>) -> Self {
        let total_volume = requests.iter().map(|r| r.volume).sum();
        DemandTable {
            requests,
            total_volume,
        }
    }
}

#[derive(Debug, Deserialize)]
struct HourlyRow {
    origin: usize,
    dest: usize,
    hour: usize,
    volume: f64,
}

#[derive(Debug, Deserialize)]
struct StepRow {
    origin: usize,
    dest: usize,
    step: usize,
    volume: f64,
}

fn check_locations(
    road: &RoadGraph,
    origin: usize,
    dest: usize,
    row: usize,
) -> Result<(), DemandError> {
    for loc in [origin, dest] {
        if loc >= road.locations.len() {
            return Err(DemandError::UnknownLocation { loc, row });
        }
    }
    Ok(())
}

/// Reads hourly rows `origin,dest,hour,volume` and expands each into one
/// request per time step of the hour, splitting the volume evenly. Rows for
/// the same (origin, dest, hour) are summed before expansion; zero-volume
/// rows are dropped. Total volume is conserved.
pub fn load_hourly_demand<R: Read>(
    reader: R,
    road: &RoadGraph,
    disc: &Discretization,
) -> Result<DemandTable, DemandError> {
    let steps_per_hour = 60.0 / disc.dt_min;
    if (steps_per_hour - steps_per_hour.round()).abs() > 1e-9 {
        return Err(DemandError::NonIntegralStepsPerHour {
            dt_min: disc.dt_min,
        });
    }
    let sph = steps_per_hour.round() as usize;

    let mut hourly: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(reader);
    for (i, rec) in rdr.deserialize::<HourlyRow>().enumerate() {
        let r = rec?;
        check_locations(road, r.origin, r.dest, i + 1)?;
        if r.volume > 0.0 {
            *hourly.entry((r.origin, r.dest, r.hour)).or_insert(0.0) += r.volume;
        }
    }

    let mut requests = Vec::new();
    for ((origin, dest, hour), volume) in hourly {
        for k in 0..sph {
            let step = hour * sph + k + 1;
            if step > disc.n_t {
                return Err(DemandError::StepOutOfHorizon {
                    step,
                    n_t: disc.n_t,
                });
            }
            requests.push(Request {
                origin,
                dest,
                depart_t: step,
                volume: volume / sph as f64,
            });
        }
    }
    requests.sort_by_key(|r| (r.origin, r.dest, r.depart_t));
    Ok(DemandTable::from_requests(requests))
}

/// Reads step-resolution rows `origin,dest,step,volume`. Rows for the same
/// (origin, dest, step) are summed; zero-volume rows are dropped.
pub fn load_step_demand<R: Read>(
    reader: R,
    road: &RoadGraph,
    disc: &Discretization,
) -> Result<DemandTable, DemandError> {
    let mut agg: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(reader);
    for (i, rec) in rdr.deserialize::<StepRow>().enumerate() {
        let r = rec?;
        check_locations(road, r.origin, r.dest, i + 1)?;
        if r.step < 1 || r.step > disc.n_t {
            return Err(DemandError::StepOutOfHorizon {
                step: r.step,
                n_t: disc.n_t,
            });
        }
        if r.volume > 0.0 {
            *agg.entry((r.origin, r.dest, r.step)).or_insert(0.0) += r.volume;
        }
    }
    let requests = agg
        .into_iter()
        .map(|((origin, dest, depart_t), volume)| Request {
            origin,
            dest,
            depart_t,
            volume,
        })
        .collect();
    Ok(DemandTable::from_requests(requests))
}

pub fn load_demand_csv(
    path: &Path,
    road: &RoadGraph,
    disc: &Discretization,
    hourly: bool,
) -> Result<DemandTable, DemandError> {
    let file = std::fs::File::open(path)?;
    if hourly {
        load_hourly_demand(file, road, disc)
    } else {
        load_step_demand(file, road, disc)
    }
}

/// Arc ids of all non-idle travel arcs that can serve the request: tail
/// location, head location, and departure step must match, across all charge
/// levels. Idle arcs never serve requests, even for self-loop trips.
pub fn request_arcs(g: &ExpandedGraph, m: &Request) -> Vec<usize> {
    g.arcs
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            matches!(a.kind, ArcKind::Travel { .. })
                && a.tail.loc == m.origin
                && a.head.loc == m.dest
                && a.tail.t == m.depart_t
        })
        .map(|(i, _)| i)
        .collect()
}

/// Pre-indexed request-arc lookup: (origin, dest, depart_t) -> travel arc ids.
pub struct RequestArcIndex {
    map: BTreeMap<(usize, usize, usize), Vec<usize>>,
}

impl RequestArcIndex {
    pub fn build(g: &ExpandedGraph) -> Self {
        let mut map: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, a) in g.arcs.iter().enumerate() {
            if a.kind.is_travel() {
                map.entry((a.tail.loc, a.head.loc, a.tail.t))
                    .or_default()
                    .push(i);
            }
        }
        RequestArcIndex { map }
    }

    pub fn arcs_for(&self, m: &Request) -> &[usize] {
        self.map
            .get(&(m.origin, m.dest, m.depart_t))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Whether a travel arc key matches any request of the table.
    pub fn keys(&self) -> impl Iterator<Item = &(usize, usize, usize)> {
        self.map.keys()
    }
}
