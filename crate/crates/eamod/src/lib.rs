//! Joint planning of charging-station siting and electric fleet operations.
//!
//! The pipeline: load a scenario (road graph, demand, tariff, vehicle,
//! charger catalog), expand the road graph over time and battery charge,
//! assemble the siting/operations linear program, solve it (embedded solver
//! or LP/MPS export for an external one), and post-process the solution into
//! cost breakdowns, siting plans, and time series.

pub mod analysis;
pub mod demand;
pub mod lpcore;
pub mod netgraph;
mod par;
pub mod scenario;
pub mod solver;
pub mod synth;
pub mod tariff;
