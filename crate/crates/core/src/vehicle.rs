//! Vehicle kinds, physical parameters, and the BEV/PHEV classification rule.

use crate::series::{HourlySeries, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A vehicle whose daily driving totals less than this many miles is treated
/// as battery-electric; everything at or above it is a plug-in hybrid.
pub const BEV_DAILY_MILES_LIMIT: f64 = 70.0;

/// Hours with more than this many miles count as driving.
pub const DRIVING_MILES_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleKind {
    Bev,
    Phev,
}

impl VehicleKind {
    pub fn label(self) -> &'static str {
        match self {
            VehicleKind::Bev => "bev",
            VehicleKind::Phev => "phev",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("profile must cover at least one 24-hour day (got {0} hours)")]
    ProfileTooShort(usize),
    #[error("invalid vehicle parameters: {0}")]
    BadParams(String),
}

/// Physical characteristics of one vehicle (or of every member of a cluster).
///
/// A BEV has no tank, fuel intake, or generator; its gasoline-side fields are
/// all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub kind: VehicleKind,
    /// Battery capacity, kWh.
    pub battery_kwh: f64,
    /// Maximum grid draw while charging, kWh per hour.
    pub charge_rate_kwh: f64,
    /// Gasoline tank capacity, gallons (0 for BEV).
    pub tank_gal: f64,
    /// Maximum fueling rate, gallons per hour (0 for BEV).
    pub fuel_rate_gal: f64,
    /// Maximum on-board generation, kWh of gasoline energy per hour (0 for BEV).
    pub gen_rate_kwh: f64,
    /// Fraction of grid energy that reaches the battery, in (0, 1].
    pub charge_eff: f64,
    /// Fraction of gasoline energy that reaches the battery, in (0, 1].
    pub gen_eff: f64,
    /// Battery content at hour zero, kWh.
    pub initial_storage_kwh: f64,
    /// Tank content at hour zero, gallons.
    pub initial_fuel_gal: f64,
    /// Battery energy consumed per mile driven.
    pub kwh_per_mile: f64,
    /// Energy content of a gallon of gasoline, kWh.
    pub kwh_per_gallon: f64,
}

impl VehicleParams {
    /// Typical battery-electric defaults; every value can be overridden via
    /// the scenario config.
    pub fn default_bev() -> Self {
        Self {
            kind: VehicleKind::Bev,
            battery_kwh: 24.0,
            charge_rate_kwh: 3.3,
            tank_gal: 0.0,
            fuel_rate_gal: 0.0,
            gen_rate_kwh: 0.0,
            charge_eff: 0.90,
            gen_eff: 0.30,
            initial_storage_kwh: 24.0,
            initial_fuel_gal: 0.0,
            kwh_per_mile: 0.30,
            kwh_per_gallon: 33.7,
        }
    }

    /// Typical plug-in hybrid defaults.
    pub fn default_phev() -> Self {
        Self {
            kind: VehicleKind::Phev,
            battery_kwh: 16.0,
            charge_rate_kwh: 3.3,
            tank_gal: 9.0,
            fuel_rate_gal: 9.0,
            gen_rate_kwh: 20.0,
            charge_eff: 0.90,
            gen_eff: 0.30,
            initial_storage_kwh: 16.0,
            initial_fuel_gal: 9.0,
            kwh_per_mile: 0.30,
            kwh_per_gallon: 33.7,
        }
    }

    /// Gallons of gasoline consumed per kWh of generation.
    pub fn gallons_per_kwh(&self) -> f64 {
        1.0 / self.kwh_per_gallon
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |msg: &str| Err(VehicleError::BadParams(msg.to_string()));
        if !(self.initial_storage_kwh >= 0.0 && self.initial_storage_kwh <= self.battery_kwh) {
            return bad("initial storage must lie within [0, battery capacity]");
        }
        if !(self.initial_fuel_gal >= 0.0 && self.initial_fuel_gal <= self.tank_gal) {
            return bad("initial fuel must lie within [0, tank capacity]");
        }
        if self.kind == VehicleKind::Bev
            && (self.tank_gal != 0.0 || self.fuel_rate_gal != 0.0 || self.gen_rate_kwh != 0.0)
        {
            return bad("a BEV must have zero tank, fuel rate, and generation rate");
        }
        let rates = [
            self.battery_kwh,
            self.charge_rate_kwh,
            self.tank_gal,
            self.fuel_rate_gal,
            self.gen_rate_kwh,
            self.kwh_per_mile,
        ];
        if rates.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("rates and capacities must be finite and non-negative");
        }
        if !(self.charge_eff > 0.0 && self.charge_eff <= 1.0) {
            return bad("charge efficiency must lie in (0, 1]");
        }
        if !(self.gen_eff > 0.0 && self.gen_eff <= 1.0) {
            return bad("generation efficiency must lie in (0, 1]");
        }
        if !(self.kwh_per_gallon > 0.0) {
            return bad("gasoline energy density must be positive");
        }
        Ok(())
    }
}

/// One vehicle in the fleet: parameters plus its reported driving schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: String,
    pub params: VehicleParams,
    /// Hourly miles over the horizon; zero entries are parked hours.
    pub profile: HourlySeries,
    /// First hour at which the vehicle is connected and can be scheduled.
    pub plug_in_hour: usize,
}

impl Vehicle {
    pub fn new(
        id: impl Into<String>,
        params: VehicleParams,
        profile: HourlySeries,
        plug_in_hour: usize,
    ) -> Self {
        debug_assert_eq!(profile.unit(), Unit::Miles);
        Self {
            id: id.into(),
            params,
            profile,
            plug_in_hour,
        }
    }

    pub fn is_driving(&self, hour: usize) -> bool {
        self.profile[hour] > DRIVING_MILES_EPS
    }
}

/// Classify a driving profile as BEV or PHEV from its first 24 hours.
///
/// Multi-day profiles in this crate repeat a single daily pattern, so the
/// first day is representative.
pub fn classify_profile(profile: &HourlySeries) -> Result<VehicleKind, VehicleError> {
    classify_daily_miles(profile.values())
}

/// Same rule on a bare slice of hourly miles.
pub fn classify_daily_miles(miles: &[f64]) -> Result<VehicleKind, VehicleError> {
    if miles.len() < 24 {
        return Err(VehicleError::ProfileTooShort(miles.len()));
    }
    let day_total: f64 = miles[..24].iter().sum();
    if day_total < BEV_DAILY_MILES_LIMIT {
        Ok(VehicleKind::Bev)
    } else {
        Ok(VehicleKind::Phev)
    }
}
