//! Electricity, maintenance, fleet, and station pricing, with the rescaling
//! arithmetic that maps monthly/annual rates onto the planning horizon.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{ChargerCatalog, Discretization};

pub const DAYS_PER_YEAR: f64 = 365.25;
pub const MONTHS_PER_YEAR: f64 = 12.0;

#[derive(Debug, Error)]
pub enum TariffError {
    #[error("invalid tariff: {0}")]
    Invalid(String),
}

/// Per-step time-of-use energy price in USD/kWh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TouSchedule {
    pub price_per_step: Vec<f64>,
}

impl TouSchedule {
    pub fn constant(price: f64, n_t: usize) -> Self {
        TouSchedule {
            price_per_step: vec![price; n_t],
        }
    }

    /// Price at a 1-based time step.
    pub fn price(&self, t: usize) -> f64 {
        self.price_per_step[t - 1]
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TouWindow {
    pub start_hour: f64,
    pub end_hour: f64,
    pub price: f64,
}

/// Builds a per-step schedule from hour-of-day windows. A step is priced by
/// the window containing its start time, `[start_hour, end_hour)`; later
/// windows override earlier ones; steps outside all windows get the default.
pub fn build_tou(windows: &[TouWindow], default_price: f64, disc: &Discretization) -> TouSchedule {
    let mut prices = vec![default_price; disc.n_t];
    for w in windows {
        for (i, p) in prices.iter_mut().enumerate() {
            let hour = i as f64 * disc.dt_min / 60.0;
            if hour >= w.start_hour && hour < w.end_hour {
                *p = w.price;
            }
        }
    }
    TouSchedule {
        price_per_step: prices,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TariffSet {
    pub tou: TouSchedule,
    /// Horizon-scaled demand charge in USD/kW.
    pub demand_charge_usd_per_kw: f64,
    pub maintenance_usd_per_km: f64,
    pub fleet_usd_per_vehicle_horizon: f64,
    /// Horizon-scaled price per plug, one entry per catalog rate.
    pub station_usd_per_plug_horizon: Vec<f64>,
}

impl TariffSet {
    pub fn validate(&self, n_t: usize, n_rates: usize) -> Result<(), TariffError> {
        if self.tou.price_per_step.len() != n_t {
            return Err(TariffError::Invalid(format!(
                "TOU schedule has {} steps, expected {n_t}",
                self.tou.price_per_step.len()
            )));
        }
        if self.station_usd_per_plug_horizon.len() != n_rates {
            return Err(TariffError::Invalid(format!(
                "{} station prices for {n_rates} charger rates",
                self.station_usd_per_plug_horizon.len()
            )));
        }
        let neg = self.tou.price_per_step.iter().any(|p| *p < 0.0)
            || self.demand_charge_usd_per_kw < 0.0
            || self.maintenance_usd_per_km < 0.0
            || self.fleet_usd_per_vehicle_horizon < 0.0
            || self.station_usd_per_plug_horizon.iter().any(|p| *p < 0.0);
        if neg {
            return Err(TariffError::Invalid("negative price".into()));
        }
        Ok(())
    }
}

/// Rescales a monthly demand charge quoted per block of power (e.g. USD per
/// 50 kW) to a horizon-scaled USD/kW rate.
pub fn rescale_monthly_demand_charge(
    usd_per_block: f64,
    block_kw: f64,
    horizon_days: f64,
) -> f64 {
    usd_per_block / block_kw * MONTHS_PER_YEAR / DAYS_PER_YEAR * horizon_days
}

/// Per-vehicle procurement cost over the horizon: annual depreciation on the
/// sale price plus fixed annual costs, prorated by horizon length.
pub fn fleet_price_per_horizon(
    sale_usd: f64,
    depreciation_per_year: f64,
    fixed_annual_usd: f64,
    horizon_days: f64,
) -> f64 {
    (depreciation_per_year * sale_usd + fixed_annual_usd) * horizon_days / DAYS_PER_YEAR
}

/// Straight-line per-plug horizon price from installed cost and lifetime.
/// A convenience helper; configured station prices normally come from an
/// equivalent-annual-cost calculation and are passed through unchanged.
pub fn straight_line_plug_price(install_usd: f64, lifetime_years: f64, horizon_days: f64) -> f64 {
    install_usd / (lifetime_years * DAYS_PER_YEAR) * horizon_days
}

/// Passes through the configured horizon-scaled per-plug prices.
pub fn station_prices_from_config(catalog: &ChargerCatalog) -> Vec<f64> {
    catalog.cost_per_plug_horizon_usd.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demand_charge_rescaling() {
        let p = rescale_monthly_demand_charge(85.98, 50.0, 1.0);
        assert!((p - 0.056497).abs() < 1e-6, "got {p}");
        assert_eq!(rescale_monthly_demand_charge(0.0, 50.0, 1.0), 0.0);
        // one average month recovers the monthly per-kW rate
        let monthly = rescale_monthly_demand_charge(85.98, 50.0, DAYS_PER_YEAR / 12.0);
        assert!((monthly - 85.98 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn fleet_price_rescaling() {
        assert!((fleet_price_per_horizon(26058.0, 0.2, 2127.0, 1.0) - 20.09).abs() < 0.01);
        assert!((fleet_price_per_horizon(31600.0, 0.2, 2127.0, 1.0) - 23.13).abs() < 0.02);
        assert_eq!(fleet_price_per_horizon(0.0, 0.2, 0.0, 1.0), 0.0);
    }

    #[test]
    fn straight_line_helper() {
        // straight-line depreciation of a 2887 USD plug over 10 years; this
        // deliberately differs from the bundled equivalent-annual-cost values
        let p = straight_line_plug_price(2887.0, 10.0, 1.0);
        assert!((p - 2887.0 / (10.0 * DAYS_PER_YEAR)).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn station_prices_pass_through() {
        let cat = ChargerCatalog {
            rates_kw: vec![7.7, 16.8, 50.0, 150.0],
            cost_per_plug_horizon_usd: vec![2.61, 3.55, 13.36, 41.37],
        };
        assert_eq!(
            station_prices_from_config(&cat),
            vec![2.61, 3.55, 13.36, 41.37]
        );
        assert!(station_prices_from_config(&ChargerCatalog::empty()).is_empty());
    }

    fn disc96() -> Discretization {
        Discretization {
            dt_min: 15.0,
            n_t: 96,
            unit_kwh: 0.74,
            n_c: 23,
        }
    }

    #[test]
    fn tou_windows() {
        let windows = vec![
            TouWindow {
                start_hour: 9.0,
                end_hour: 14.0,
                price: 0.10320,
            },
            TouWindow {
                start_hour: 16.0,
                end_hour: 21.0,
                price: 0.33474,
            },
        ];
        let tou = build_tou(&windows, 0.2, &disc96());
        let step_of = |hour: f64| (hour * 4.0) as usize + 1;
        assert_eq!(tou.price(step_of(10.0)), 0.10320);
        assert_eq!(tou.price(step_of(17.0)), 0.33474);
        assert_eq!(tou.price(step_of(3.0)), 0.2);
        assert_eq!(tou.price_per_step.len(), 96);
    }

    #[test]
    fn tou_no_windows_constant() {
        let tou = build_tou(&[], 0.2, &disc96());
        assert!(tou.price_per_step.iter().all(|p| *p == 0.2));
    }

    #[test]
    fn tou_overlapping_last_wins() {
        let windows = vec![
            TouWindow {
                start_hour: 8.0,
                end_hour: 12.0,
                price: 0.1,
            },
            TouWindow {
                start_hour: 10.0,
                end_hour: 11.0,
                price: 0.5,
            },
        ];
        let tou = build_tou(&windows, 0.2, &disc96());
        assert_eq!(tou.price(41), 0.5); // 10:00
        assert_eq!(tou.price(37), 0.1); // 09:00
    }
}
