//! Synthetic scenario generation: seeded random small instances for property
//! testing and a deterministic grid instance for benchmarking.

use crate::demand::{DemandTable, Request};
use crate::netgraph::{
    discretize_road_arc, BuildOptions, ChargerCatalog, Discretization, Location, RoadArc,
    RoadGraph, VehicleSpec,
};
use crate::tariff::{build_tou, TariffSet, TouWindow};

/// SplitMix64; enough randomness for scenario sampling and fully
/// reproducible from the seed.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.wrapping_add(0x9E3779B97F4A7C15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub road: RoadGraph,
    pub disc: Discretization,
    pub vehicle: VehicleSpec,
    pub catalog: ChargerCatalog,
    pub tariff: TariffSet,
    pub demand: DemandTable,
    pub build_opts: BuildOptions,
}

fn location(id: usize) -> Location {
    Location {
        id,
        name: format!("z{id}"),
        is_passthrough: false,
        distance_offset_km: 0.0,
        time_offset_min: 0.0,
    }
}

/// A random small scenario. The road graph is complete with self-loops, all
/// locations have chargers, and demand departs in the first half of the
/// horizon, so most seeds are feasible.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = Rng::new(seed);
    let n_locs = 2 + rng.below(3);
    let n_t = 8 + rng.below(8);
    let dt_min = 15.0;
    let unit_kwh = rng.range(0.5, 1.0);
    let n_c = 4 + rng.below(3);

    let vehicle = VehicleSpec {
        battery_kwh: unit_kwh * (n_c - 1) as f64 / 0.6,
        efficiency_wh_per_km: rng.range(110.0, 200.0),
        soc_min: 0.2,
        soc_max: 0.8,
        max_charge_kw: rng.range(20.0, 60.0),
        charge_efficiency: rng.range(0.85, 1.0),
        efficiency_side: Default::default(),
    };

    let mut arcs = Vec::new();
    for o in 0..n_locs {
        for d in 0..n_locs {
            let distance_km = if o == d {
                rng.range(1.0, 3.0)
            } else {
                rng.range(3.0, 8.0)
            };
            let travel_time_min = rng.range(8.0, 28.0);
            arcs.push(RoadArc {
                origin: o,
                dest: d,
                distance_km,
                travel_time_min,
                energy_kwh: distance_km * vehicle.efficiency_wh_per_km / 1000.0,
            });
        }
    }
    let road = RoadGraph {
        locations: (0..n_locs).map(location).collect(),
        arcs,
    };

    let n_rates = 1 + rng.below(2);
    let mut rates = vec![rng.range(6.0, 12.0)];
    if n_rates == 2 {
        rates.push(rates[0] + rng.range(8.0, 30.0));
    }
    let catalog = ChargerCatalog {
        cost_per_plug_horizon_usd: rates.iter().map(|_| rng.range(0.5, 5.0)).collect(),
        rates_kw: rates,
    };

    let disc = Discretization {
        dt_min,
        n_t,
        unit_kwh,
        n_c,
    };

    let windows = vec![TouWindow {
        start_hour: rng.range(0.0, 1.0),
        end_hour: rng.range(1.0, 2.0),
        price: rng.range(0.25, 0.4),
    }];
    let tariff = TariffSet {
        tou: build_tou(&windows, rng.range(0.08, 0.2), &disc),
        demand_charge_usd_per_kw: rng.range(0.0, 0.1),
        maintenance_usd_per_km: rng.range(0.02, 0.08),
        fleet_usd_per_vehicle_horizon: rng.range(5.0, 40.0),
        station_usd_per_plug_horizon: catalog.cost_per_plug_horizon_usd.clone(),
    };

    // Requests on existing road arcs, departing early enough to finish and
    // recover before the horizon ends.
    let n_requests = 1 + rng.below(4);
    let mut requests = Vec::new();
    for _ in 0..n_requests {
        let arc = &road.arcs[rng.below(road.arcs.len())];
        let (steps, _) = discretize_road_arc(arc, &disc).expect("synthetic arcs are feasible");
        let latest = (n_t / 2).max(steps + 1).min(n_t - steps);
        let depart_t = 1 + rng.below(latest);
        requests.push(Request {
            origin: arc.origin,
            dest: arc.dest,
            depart_t,
            volume: rng.range(0.5, 4.0),
        });
    }
    requests.sort_by_key(|r| (r.origin, r.dest, r.depart_t));
    requests.dedup_by(|a, b| {
        if (a.origin, a.dest, a.depart_t) == (b.origin, b.dest, b.depart_t) {
            b.volume += a.volume;
            true
        } else {
            false
        }
    });
    let demand = DemandTable::from_requests(requests);

    Scenario {
        road,
        disc,
        vehicle,
        catalog,
        tariff,
        demand,
        build_opts: BuildOptions::default(),
    }
}

/// Deterministic medium-size instance for benchmarks: `n_locs` zones on a
/// ring with self-loops, chargers everywhere, commuter-style demand.
pub fn bench_scenario(n_locs: usize, n_t: usize, n_c: usize) -> Scenario {
    let vehicle = VehicleSpec {
        battery_kwh: 30.0,
        efficiency_wh_per_km: 150.0,
        soc_min: 0.2,
        soc_max: 0.8,
        max_charge_kw: 50.0,
        charge_efficiency: 0.9,
        efficiency_side: Default::default(),
    };
    let mut arcs = Vec::new();
    for o in 0..n_locs {
        for d in [o, (o + 1) % n_locs, (o + n_locs - 1) % n_locs] {
            let distance_km = if o == d { 2.0 } else { 5.0 + (o % 3) as f64 };
            arcs.push(RoadArc {
                origin: o,
                dest: d,
                distance_km,
                travel_time_min: 10.0 + (d % 2) as f64 * 12.0,
                energy_kwh: distance_km * vehicle.efficiency_wh_per_km / 1000.0,
            });
        }
    }
    arcs.sort_by_key(|a| (a.origin, a.dest));
    arcs.dedup_by_key(|a| (a.origin, a.dest));
    let road = RoadGraph {
        locations: (0..n_locs).map(location).collect(),
        arcs,
    };
    let disc = Discretization {
        dt_min: 15.0,
        n_t,
        unit_kwh: (vehicle.usable_kwh() / (n_c - 1) as f64 * 100.0).round() / 100.0,
        n_c,
    };
    let catalog = ChargerCatalog {
        rates_kw: vec![7.7, 22.0],
        cost_per_plug_horizon_usd: vec![2.61, 5.0],
    };
    let tariff = TariffSet {
        tou: build_tou(
            &[TouWindow {
                start_hour: 4.0,
                end_hour: 8.0,
                price: 0.33,
            }],
            0.12,
            &disc,
        ),
        demand_charge_usd_per_kw: 0.05,
        maintenance_usd_per_km: 0.0464,
        fleet_usd_per_vehicle_horizon: 23.12,
        station_usd_per_plug_horizon: catalog.cost_per_plug_horizon_usd.clone(),
    };
    let mut requests = Vec::new();
    for o in 0..n_locs {
        let d = (o + 1) % n_locs;
        for t in (2..n_t / 2).step_by(3) {
            requests.push(Request {
                origin: o,
                dest: d,
                depart_t: t,
                volume: 2.0 + (o % 2) as f64,
            });
        }
    }
    Scenario {
        road,
        disc,
        vehicle,
        catalog,
        tariff,
        demand: DemandTable::from_requests(requests),
        build_opts: BuildOptions::default(),
    }
}
