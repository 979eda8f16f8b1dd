//! Sparse, solver-agnostic representation of the joint siting/operations
//! linear program, its assembly from the expanded graph, and file export.

mod assemble;
mod files;

pub use assemble::{assemble, assemble_sequential};
pub use files::{export_lp, export_mps, import_solution, read_solution, write_lp, write_mps};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::netgraph::ExpandedGraph;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("request {origin}->{dest} departing at step {depart_t} has no serving arc")]
    InfeasibleRequest {
        origin: usize,
        dest: usize,
        depart_t: usize,
    },
    #[error("unknown variable name `{name}` in solution file")]
    NameMismatch { name: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Constraint families of the assembled model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    /// Fleet size definition: total outflow at the first step equals F.
    FleetSize,
    /// Every travel request is served exactly.
    RequestCoverage,
    /// Flow conservation at interior nodes.
    Conservation,
    /// Terminal state equals initial state per (location, charge).
    Periodicity,
    /// Per-location charging power never exceeds its peak variable.
    PeakPower,
    /// Nested plug-capacity rows with spill-over to faster plugs.
    StationCapacity,
    /// Variable bounds.
    Bounds,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::FleetSize,
        Family::RequestCoverage,
        Family::Conservation,
        Family::Periodicity,
        Family::PeakPower,
        Family::StationCapacity,
        Family::Bounds,
    ];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::FleetSize => "fleet_size",
            Family::RequestCoverage => "request_coverage",
            Family::Conservation => "conservation",
            Family::Periodicity => "periodicity",
            Family::PeakPower => "peak_power",
            Family::StationCapacity => "station_capacity",
            Family::Bounds => "bounds",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub family: Family,
    pub sense: Sense,
    pub rhs: f64,
    /// Sorted by variable index, one entry per variable.
    pub coeffs: Vec<(usize, f64)>,
    /// Family-specific key, e.g. (location, time) for peak-power rows.
    pub key: Option<(usize, usize)>,
}

impl Row {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|(v, c)| c * x[*v]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
        }
    }
}

/// Whether station plug counts are decision variables or fixed inputs.
#[derive(Debug, Clone)]
pub enum Mode {
    Joint,
    /// Fixed plug counts, indexed `[location][rate]`.
    Baseline(Vec<Vec<f64>>),
}

impl Mode {
    pub fn is_joint(&self) -> bool {
        matches!(self, Mode::Joint)
    }
}

/// Dense contiguous variable layout: flows, then plug counts (joint mode
/// only), then per-location peaks, then the fleet-size variable.
#[derive(Debug, Clone, Copy)]
pub struct VariableSpace {
    pub n_arcs: usize,
    pub n_locs: usize,
    pub n_rates: usize,
    pub has_plug_vars: bool,
}

impl VariableSpace {
    pub fn count(&self) -> usize {
        self.n_arcs + self.plug_var_count() + self.n_locs + 1
    }

    fn plug_var_count(&self) -> usize {
        if self.has_plug_vars {
            self.n_locs * self.n_rates
        } else {
            0
        }
    }

    pub fn flow(&self, arc: usize) -> usize {
        debug_assert!(arc < self.n_arcs);
        arc
    }

    pub fn plug(&self, loc: usize, rate: usize) -> Option<usize> {
        if self.has_plug_vars {
            Some(self.n_arcs + loc * self.n_rates + rate)
        } else {
            None
        }
    }

    pub fn peak(&self, loc: usize) -> usize {
        self.n_arcs + self.plug_var_count() + loc
    }

    pub fn fleet(&self) -> usize {
        self.count() - 1
    }
}

#[derive(Debug, Clone)]
pub struct LpModel {
    pub vars: VariableSpace,
    pub var_names: Vec<String>,
    /// Dense minimization objective.
    pub objective: Vec<f64>,
    /// Constant objective offset (fixed station cost in baseline mode).
    pub objective_constant: f64,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpModel {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

/// Per-node in/out arc lists of the expanded graph. Every arc appears exactly
/// once as an in-arc of its head and once as an out-arc of its tail.
pub struct IncidenceView {
    pub in_arcs: Vec<Vec<usize>>,
    pub out_arcs: Vec<Vec<usize>>,
}

impl IncidenceView {
    pub fn build(g: &ExpandedGraph) -> Self {
        let n = g.node_count();
        let mut in_arcs = vec![Vec::new(); n];
        let mut out_arcs = vec![Vec::new(); n];
        for (i, a) in g.arcs.iter().enumerate() {
            out_arcs[g.node_index(a.tail)].push(i);
            in_arcs[g.node_index(a.head)].push(i);
        }
        IncidenceView { in_arcs, out_arcs }
    }
}

/// Maximum violation per constraint family, including variable bounds.
pub fn residuals(model: &LpModel, x: &[f64]) -> BTreeMap<Family, f64> {
    let mut out: BTreeMap<Family, f64> = Family::ALL.iter().map(|f| (*f, 0.0)).collect();
    for row in &model.rows {
        let v = row.violation(x);
        let e = out.get_mut(&row.family).unwrap();
        if v > *e {
            *e = v;
        }
    }
    let mut bound = 0.0f64;
    for (i, xi) in x.iter().enumerate() {
        bound = bound.max(model.lower[i] - xi).max(xi - model.upper[i]);
    }
    out.insert(Family::Bounds, bound.max(0.0));
    out
}

pub fn max_residual(model: &LpModel, x: &[f64]) -> f64 {
    residuals(model, x)
        .values()
        .fold(0.0f64, |acc, v| acc.max(*v))
}
