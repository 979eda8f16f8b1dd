//! Builds the joint (or fixed-baseline) LP from the expanded graph, demand
//! table, tariff, and charger catalog.

use crate::demand::{DemandTable, RequestArcIndex};
use crate::netgraph::{ArcKind, ChargerCatalog, ExpandedGraph};
use crate::par;
use crate::tariff::TariffSet;

use super::{Family, IncidenceView, LpModel, LpError, Mode, Row, Sense, VariableSpace};

pub fn assemble(
    graph: &ExpandedGraph,
    demand: &DemandTable,
    tariff: &TariffSet,
    catalog: &ChargerCatalog,
    mode: &Mode,
) -> Result<LpModel, LpError> {
    assemble_inner(graph, demand, tariff, catalog, mode, true)
}

/// Sequential variant of [`assemble`]; used by the benchmarks.
pub fn assemble_sequential(
    graph: &ExpandedGraph,
    demand: &DemandTable,
    tariff: &TariffSet,
    catalog: &ChargerCatalog,
    mode: &Mode,
) -> Result<LpModel, LpError> {
    assemble_inner(graph, demand, tariff, catalog, mode, false)
}

fn merge_coeffs(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|(v, _)| *v);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (v, c) in coeffs {
        match out.last_mut() {
            Some((lv, lc)) if *lv == v => *lc += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

fn assemble_inner(
    graph: &ExpandedGraph,
    demand: &DemandTable,
    tariff: &TariffSet,
    catalog: &ChargerCatalog,
    mode: &Mode,
    parallel: bool,
) -> Result<LpModel, LpError> {
    let n_t = graph.disc.n_t;
    let n_c = graph.disc.n_c;
    let n_locs = graph.n_locs;
    let n_rates = catalog.n_rates();
    let dt_h = graph.disc.dt_hours();

    let vars = VariableSpace {
        n_arcs: graph.arcs.len(),
        n_locs,
        n_rates,
        has_plug_vars: mode.is_joint(),
    };
    let n_vars = vars.count();

    let mut var_names = Vec::with_capacity(n_vars);
    for a in 0..graph.arcs.len() {
        var_names.push(format!("f_{a}"));
    }
    if vars.has_plug_vars {
        for loc in 0..n_locs {
            for r in 0..n_rates {
                var_names.push(format!("s_l{loc}_r{r}"));
            }
        }
    }
    for loc in 0..n_locs {
        var_names.push(format!("pmax_l{loc}"));
    }
    var_names.push("F".to_string());

    // Objective: energy cost on charge arcs, maintenance on non-idle travel,
    // demand charges on peaks, procurement on fleet and plugs.
    let mut objective = vec![0.0; n_vars];
    let mut objective_constant = 0.0;
    for (i, a) in graph.arcs.iter().enumerate() {
        match a.kind {
            ArcKind::Charge { .. } => {
                objective[vars.flow(i)] = a.grid_energy_kwh * tariff.tou.price(a.tail.t);
            }
            ArcKind::Travel { .. } => {
                objective[vars.flow(i)] = a.distance_km * tariff.maintenance_usd_per_km;
            }
            ArcKind::Idle => {}
        }
    }
    for loc in 0..n_locs {
        objective[vars.peak(loc)] = tariff.demand_charge_usd_per_kw;
    }
    objective[vars.fleet()] = tariff.fleet_usd_per_vehicle_horizon;
    match mode {
        Mode::Joint => {
            for loc in 0..n_locs {
                for r in 0..n_rates {
                    objective[vars.plug(loc, r).unwrap()] =
                        tariff.station_usd_per_plug_horizon[r];
                }
            }
        }
        Mode::Baseline(plugs) => {
            for loc in 0..n_locs {
                for r in 0..n_rates {
                    objective_constant += plugs[loc][r] * tariff.station_usd_per_plug_horizon[r];
                }
            }
        }
    }

    let inc = IncidenceView::build(graph);
    let mut rows: Vec<Row> = Vec::new();

    // Fleet size: total outflow at the first step equals F.
    {
        let mut coeffs: Vec<(usize, f64)> = graph
            .arcs
            .iter()
            .enumerate()
            .filter(|(_, a)| a.tail.t == 1)
            .map(|(i, _)| (vars.flow(i), 1.0))
            .collect();
        coeffs.push((vars.fleet(), -1.0));
        rows.push(Row {
            name: "fleet_size".into(),
            family: Family::FleetSize,
            sense: Sense::Eq,
            rhs: 0.0,
            coeffs: merge_coeffs(coeffs),
            key: None,
        });
    }

    // Request coverage: each request is served exactly.
    let req_index = RequestArcIndex::build(graph);
    for m in &demand.requests {
        let arcs = req_index.arcs_for(m);
        if arcs.is_empty() {
            return Err(LpError::InfeasibleRequest {
                origin: m.origin,
                dest: m.dest,
                depart_t: m.depart_t,
            });
        }
        rows.push(Row {
            name: format!("req_{}_{}_{}", m.origin, m.dest, m.depart_t),
            family: Family::RequestCoverage,
            sense: Sense::Eq,
            rhs: m.volume,
            coeffs: merge_coeffs(arcs.iter().map(|a| (vars.flow(*a), 1.0)).collect()),
            key: None,
        });
    }

    // Conservation at interior nodes, one slice of rows per time step.
    let conservation_slice = |t: usize| -> Vec<Row> {
        let mut slice_rows = Vec::new();
        for loc in 0..n_locs {
            for c in 1..=n_c {
                let node = (loc * n_t + (t - 1)) * n_c + (c - 1);
                let ins = &inc.in_arcs[node];
                let outs = &inc.out_arcs[node];
                if ins.is_empty() && outs.is_empty() {
                    continue;
                }
                let mut coeffs: Vec<(usize, f64)> =
                    ins.iter().map(|a| (vars.flow(*a), 1.0)).collect();
                coeffs.extend(outs.iter().map(|a| (vars.flow(*a), -1.0)));
                slice_rows.push(Row {
                    name: format!("cons_l{loc}_t{t}_c{c}"),
                    family: Family::Conservation,
                    sense: Sense::Eq,
                    rhs: 0.0,
                    coeffs: merge_coeffs(coeffs),
                    key: Some((loc, t)),
                });
            }
        }
        slice_rows
    };
    let interior: Vec<usize> = (2..n_t).collect();
    let per_slice: Vec<Vec<Row>> = if parallel {
        par::map_collect(interior, conservation_slice)
    } else {
        interior.into_iter().map(conservation_slice).collect()
    };
    rows.extend(per_slice.into_iter().flatten());

    // Periodicity: inflow at the last step equals outflow at the first step,
    // per (location, charge).
    for loc in 0..n_locs {
        for c in 1..=n_c {
            let last = (loc * n_t + (n_t - 1)) * n_c + (c - 1);
            let first = (loc * n_t) * n_c + (c - 1);
            let ins = &inc.in_arcs[last];
            let outs = &inc.out_arcs[first];
            if ins.is_empty() && outs.is_empty() {
                continue;
            }
            let mut coeffs: Vec<(usize, f64)> = ins.iter().map(|a| (vars.flow(*a), 1.0)).collect();
            coeffs.extend(outs.iter().map(|a| (vars.flow(*a), -1.0)));
            rows.push(Row {
                name: format!("per_l{loc}_c{c}"),
                family: Family::Periodicity,
                sense: Sense::Eq,
                rhs: 0.0,
                coeffs: merge_coeffs(coeffs),
                key: Some((loc, c)),
            });
        }
    }

    // Charge arcs grouped by (location, tail step).
    let mut charge_at: Vec<Vec<Vec<(usize, usize)>>> = Vec::new(); // [loc][t-1] -> (arc, class)
    if n_rates > 0 {
        charge_at = vec![vec![Vec::new(); n_t]; n_locs];
        for (i, a) in graph.arcs.iter().enumerate() {
            if let ArcKind::Charge { rate_class, .. } = a.kind {
                charge_at[a.tail.loc][a.tail.t - 1].push((i, rate_class));
            }
        }
    }

    // Peak power: per-(location, step) grid-side charging power is bounded by
    // the location's peak variable.
    for loc in 0..n_locs {
        for t in 1..=n_t {
            if n_rates == 0 || charge_at[loc][t - 1].is_empty() {
                continue;
            }
            let mut coeffs: Vec<(usize, f64)> = charge_at[loc][t - 1]
                .iter()
                .map(|(a, _)| (vars.flow(*a), graph.arcs[*a].grid_energy_kwh / dt_h))
                .collect();
            coeffs.push((vars.peak(loc), -1.0));
            rows.push(Row {
                name: format!("peak_l{loc}_t{t}"),
                family: Family::PeakPower,
                sense: Sense::Le,
                rhs: 0.0,
                coeffs: merge_coeffs(coeffs),
                key: Some((loc, t)),
            });
        }
    }

    // Station capacity: nested rows. For each cutoff class j, flows in
    // classes j.. may not exceed plugs of classes j.. (slower flows may spill
    // onto unused faster plugs, never the reverse).
    for loc in 0..n_locs {
        for t in 1..=n_t {
            if n_rates == 0 || charge_at[loc][t - 1].is_empty() {
                continue;
            }
            for j in 0..n_rates {
                let mut coeffs: Vec<(usize, f64)> = charge_at[loc][t - 1]
                    .iter()
                    .filter(|(_, class)| *class >= j)
                    .map(|(a, _)| (vars.flow(*a), 1.0))
                    .collect();
                let mut rhs = 0.0;
                match mode {
                    Mode::Joint => {
                        for k in j..n_rates {
                            coeffs.push((vars.plug(loc, k).unwrap(), -1.0));
                        }
                    }
                    Mode::Baseline(plugs) => {
                        for k in j..n_rates {
                            rhs += plugs[loc][k];
                        }
                    }
                }
                rows.push(Row {
                    name: format!("cap_l{loc}_t{t}_j{}", j + 1),
                    family: Family::StationCapacity,
                    sense: Sense::Le,
                    rhs,
                    coeffs: merge_coeffs(coeffs),
                    key: Some((loc, t)),
                });
            }
        }
    }

    Ok(LpModel {
        vars,
        var_names,
        objective,
        objective_constant,
        rows,
        lower: vec![0.0; n_vars],
        upper: vec![f64::INFINITY; n_vars],
    })
}
