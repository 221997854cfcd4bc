//! Hour-indexed value series with unit tags.
//!
//! Every quantity the scheduler works with (driving miles, loads, prices,
//! charge allowances) is a vector with one entry per hour of the horizon.
//! The unit tag decides whether negative entries are legal: prices may go
//! negative, physical quantities may not.

use serde::{Deserialize, Serialize};
use std::ops::Index;
use thiserror::Error;

/// Unit tag for an [`HourlySeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Miles,
    KilowattHours,
    Kilowatts,
    Gallons,
    DollarsPerKilowattHour,
    DollarsPerGallon,
}

impl Unit {
    /// Prices may be negative (surplus generation can push them below zero);
    /// physical quantities may not.
    pub fn allows_negative(self) -> bool {
        matches!(
            self,
            Unit::DollarsPerKilowattHour | Unit::DollarsPerGallon
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series must not be empty")]
    Empty,
    #[error("non-finite value {value} at hour {hour}")]
    NonFinite { hour: usize, value: f64 },
    #[error("negative value {value} at hour {hour} not allowed for {unit:?}")]
    Negative { hour: usize, value: f64, unit: Unit },
    #[error("series length {len} is not a multiple of / equal to target {target}")]
    BadTile { len: usize, target: usize },
}

/// A vector of per-hour values over the scheduling horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    unit: Unit,
    values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(unit: Unit, values: Vec<f64>) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (hour, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::NonFinite { hour, value });
            }
            if value < 0.0 && !unit.allows_negative() {
                return Err(SeriesError::Negative { hour, value, unit });
            }
        }
        Ok(Self { unit, values })
    }

    pub fn zeros(unit: Unit, len: usize) -> Self {
        Self {
            unit,
            values: vec![0.0; len],
        }
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Repeat the series until it covers `target` hours. The target must be
    /// an exact multiple of the current length (a daily pattern tiled over a
    /// multi-day horizon).
    pub fn tiled(&self, target: usize) -> Result<Self, SeriesError> {
        if self.values.is_empty() || target % self.values.len() != 0 {
            return Err(SeriesError::BadTile {
                len: self.values.len(),
                target,
            });
        }
        let reps = target / self.values.len();
        let mut values = Vec::with_capacity(target);
        for _ in 0..reps {
            values.extend_from_slice(&self.values);
        }
        Ok(Self {
            unit: self.unit,
            values,
        })
    }
}

impl Index<usize> for HourlySeries {
    type Output = f64;

    fn index(&self, hour: usize) -> &f64 {
        &self.values[hour]
    }
}
