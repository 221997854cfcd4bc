//! Scenario configuration: horizon, loads, prices, and the fleet charge cap.

use crate::series::{HourlySeries, SeriesError, Unit};
use crate::vehicle::VehicleParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("alpha must be positive (got {0})")]
    BadAlpha(f64),
    #[error("series `{name}` has length {got}, horizon is {want}")]
    LengthMismatch {
        name: &'static str,
        got: usize,
        want: usize,
    },
    #[error("fleet size must be positive")]
    EmptyFleet,
}

/// Hourly fleet charging allowance derived from a base load curve.
///
/// For each calendar day within the horizon the allowance at hour `h` is
/// `max(0, alpha * daily_peak - load_h)` kWh: the headroom between the
/// current load and a fraction of that day's peak demand. A trailing partial
/// day uses its own peak.
pub fn cap_from_load(base_load: &HourlySeries, alpha: f64) -> Result<HourlySeries, ScenarioError> {
    if !(alpha > 0.0) {
        return Err(ScenarioError::BadAlpha(alpha));
    }
    if base_load.is_empty() {
        return Err(ScenarioError::Series(SeriesError::Empty));
    }
    let mut cap = Vec::with_capacity(base_load.len());
    for day in base_load.values().chunks(24) {
        let peak = day.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ceiling = alpha * peak;
        for &load in day {
            cap.push((ceiling - load).max(0.0));
        }
    }
    Ok(HourlySeries::new(Unit::KilowattHours, cap)?)
}

/// Everything a simulation run needs to know about the world: the horizon,
/// the non-PEV load, prices, the charge cap, and the fleet makeup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// Horizon length in hours.
    pub horizon: usize,
    /// Aggregate electricity load without PEVs, kW.
    pub base_load: HourlySeries,
    /// Electricity price, $/kWh (may be negative).
    pub elec_price: HourlySeries,
    /// Gasoline price, $/gallon.
    pub gas_price: HourlySeries,
    /// Fleet-wide charging allowance per hour, kWh.
    pub charge_cap: HourlySeries,
    /// Number of vehicles in the fleet.
    pub fleet_size: usize,
    /// Master seed for fleet sampling and plug-in times.
    pub seed: u64,
    /// Parameters shared by all battery-electric vehicles.
    pub bev: VehicleParams,
    /// Parameters shared by all plug-in hybrids.
    pub phev: VehicleParams,
    /// Plug-in times are drawn uniformly from `[start, start + length)`.
    pub plug_window: PlugWindow,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlugWindow {
    pub start: usize,
    pub length: usize,
}

impl Default for PlugWindow {
    fn default() -> Self {
        PlugWindow {
            start: 0,
            length: 12,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let check = |name: &'static str, s: &HourlySeries| {
            if s.len() != self.horizon {
                Err(ScenarioError::LengthMismatch {
                    name,
                    got: s.len(),
                    want: self.horizon,
                })
            } else {
                Ok(())
            }
        };
        check("base_load", &self.base_load)?;
        check("elec_price", &self.elec_price)?;
        check("gas_price", &self.gas_price)?;
        check("charge_cap", &self.charge_cap)?;
        if self.fleet_size == 0 {
            return Err(ScenarioError::EmptyFleet);
        }
        Ok(())
    }
}
