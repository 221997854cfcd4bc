//! Assembly of the fleet charging linear program.
//!
//! One block of variables per unit (a behavior cluster, or a single vehicle
//! in the validation build): storage, charging, fuel storage, fueling, and
//! generation, one value per hour. Battery and fuel balances are equality
//! rows; driving/parked restrictions are variable fixings (bounds clamped to
//! zero) rather than big-M rows so their multipliers fall out as reduced
//! costs; the fleet cap is one `<=` row per hour.

use crate::cluster::ClusterSet;
use crate::scenario::Scenario;
use crate::series::HourlySeries;
use crate::vehicle::{Vehicle, VehicleParams, DRIVING_MILES_EPS};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cluster set is empty")]
    EmptyClusters,
    #[error("profile of unit {unit} has length {len}; cannot tile to horizon {horizon}")]
    BadProfileLength {
        unit: usize,
        len: usize,
        horizon: usize,
    },
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Equal,
    LessEqual,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Column {
    pub obj: f64,
    pub lower: f64,
    pub upper: f64,
    /// Sparse entries (row, coefficient).
    pub entries: Vec<(usize, f64)>,
}

/// The five per-hour variable families of one unit, in column-layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarFamily {
    /// Battery content at the end of the hour, kWh.
    Storage,
    /// Grid energy drawn during the hour, kWh.
    Charge,
    /// Tank content at the end of the hour, gallons.
    FuelStorage,
    /// Gasoline added to the tank during the hour, gallons.
    Fuel,
    /// Gasoline energy converted on board during the hour, kWh.
    Generate,
}

pub const FAMILIES: [VarFamily; 5] = [
    VarFamily::Storage,
    VarFamily::Charge,
    VarFamily::FuelStorage,
    VarFamily::Fuel,
    VarFamily::Generate,
];

impl VarFamily {
    pub fn index(self) -> usize {
        match self {
            VarFamily::Storage => 0,
            VarFamily::Charge => 1,
            VarFamily::FuelStorage => 2,
            VarFamily::Fuel => 3,
            VarFamily::Generate => 4,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            VarFamily::Storage => "s",
            VarFamily::Charge => "c",
            VarFamily::FuelStorage => "sg",
            VarFamily::Fuel => "f",
            VarFamily::Generate => "g",
        }
    }
}

/// Index map from (unit, family, hour) to columns and rows of the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetLayout {
    /// Horizon length in hours.
    pub n: usize,
    /// Number of units (clusters or vehicles).
    pub units: usize,
    /// Demand weight per unit (cluster weight, or 1 per vehicle).
    pub weights: Vec<f64>,
    /// Charging efficiency per unit.
    pub charge_eff: Vec<f64>,
    /// First battery-balance row of each unit.
    pub battery_row_base: Vec<usize>,
    /// First fuel-balance row of each unit (absent for units without a
    /// gasoline side).
    pub fuel_row_base: Vec<Option<usize>>,
    /// First fleet-cap row.
    pub cap_row_base: usize,
    /// Driving mask per unit and hour.
    pub driving: Vec<Vec<bool>>,
}

impl FleetLayout {
    pub fn col(&self, unit: usize, family: VarFamily, hour: usize) -> usize {
        (unit * 5 + family.index()) * self.n + hour
    }

    pub fn battery_row(&self, unit: usize, hour: usize) -> usize {
        self.battery_row_base[unit] + hour
    }

    pub fn fuel_row(&self, unit: usize, hour: usize) -> Option<usize> {
        self.fuel_row_base[unit].map(|base| base + hour)
    }

    pub fn cap_row(&self, hour: usize) -> usize {
        self.cap_row_base + hour
    }

    pub fn num_cols(&self) -> usize {
        self.units * 5 * self.n
    }
}

/// A bounded linear program plus, for fleet builds, the index map that ties
/// columns and rows back to units and hours.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpModel {
    pub cols: Vec<Column>,
    pub rows: Vec<Row>,
    pub layout: Option<FleetLayout>,
}

impl LpModel {
    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Residuals of a candidate point against the original model data:
    /// (max |equality residual|, max `<=` violation, max bound violation).
    pub fn residuals(&self, x: &[f64]) -> (f64, f64, f64) {
        let mut activity = vec![0.0; self.rows.len()];
        for (col, &v) in self.cols.iter().zip(x) {
            if v != 0.0 {
                for &(row, a) in &col.entries {
                    activity[row] += a * v;
                }
            }
        }
        let mut eq = 0.0f64;
        let mut le = 0.0f64;
        for (row, &act) in self.rows.iter().zip(&activity) {
            match row.kind {
                RowKind::Equal => eq = eq.max((act - row.rhs).abs()),
                RowKind::LessEqual => le = le.max(act - row.rhs),
            }
        }
        let mut bound = 0.0f64;
        for (col, &v) in self.cols.iter().zip(x) {
            bound = bound.max(col.lower - v).max(v - col.upper);
        }
        (eq, le.max(0.0), bound.max(0.0))
    }

    /// Export in the plain-text LP interchange format so the model can be
    /// cross-checked with third-party solvers.
    pub fn to_lp_format(&self) -> String {
        let name = |j: usize| -> String {
            if let Some(layout) = &self.layout {
                let per_unit = 5 * layout.n;
                let unit = j / per_unit;
                let family = FAMILIES[(j % per_unit) / layout.n];
                let hour = j % layout.n;
                format!("{}_{}_{}", family.tag(), unit, hour)
            } else {
                format!("x{j}")
            }
        };
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        let mut any = false;
        for (j, colspec) in self.cols.iter().enumerate() {
            if colspec.obj != 0.0 {
                let _ = write!(out, " {} {}", term(colspec.obj, any), name(j));
                any = true;
            }
        }
        if !any {
            out.push_str(" 0 x0");
        }
        out.push_str("\nSubject To\n");
        let mut row_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.rows.len()];
        for (j, colspec) in self.cols.iter().enumerate() {
            for &(row, a) in &colspec.entries {
                row_terms[row].push((j, a));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{i}:");
            let mut first = true;
            for &(j, a) in &row_terms[i] {
                let _ = write!(out, " {} {}", term(a, !first), name(j));
                first = false;
            }
            if first {
                out.push_str(" 0 x0");
            }
            let op = match row.kind {
                RowKind::Equal => "=",
                RowKind::LessEqual => "<=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, colspec) in self.cols.iter().enumerate() {
            if colspec.lower == colspec.upper {
                let _ = writeln!(out, " {} = {}", name(j), colspec.lower);
            } else if colspec.upper.is_infinite() {
                let _ = writeln!(out, " {} >= {}", name(j), colspec.lower);
            } else {
                let _ = writeln!(out, " {} <= {} <= {}", colspec.lower, name(j), colspec.upper);
            }
        }
        out.push_str("End\n");
        out
    }
}

fn term(coef: f64, signed: bool) -> String {
    if signed {
        if coef < 0.0 {
            format!("- {}", -coef)
        } else {
            format!("+ {coef}")
        }
    } else {
        format!("{coef}")
    }
}

/// One schedulable unit for the model builder.
struct UnitSpec<'a> {
    params: &'a VehicleParams,
    profile: &'a HourlySeries,
    weight: f64,
}

/// Build the clustered program: one weighted block per behavior cluster.
pub fn build_clp(set: &ClusterSet, scenario: &Scenario) -> Result<LpModel, ModelError> {
    if set.is_empty() {
        return Err(ModelError::EmptyClusters);
    }
    scenario.validate()?;
    let units: Vec<UnitSpec> = set
        .clusters
        .iter()
        .map(|c| UnitSpec {
            params: &c.params,
            profile: &c.centroid,
            weight: c.weight,
        })
        .collect();
    build(&units, scenario)
}

/// Build the per-vehicle program with unit weights. Intended for validation
/// at small fleet sizes; the column count grows with every vehicle.
pub fn build_full_lp(fleet: &[Vehicle], scenario: &Scenario) -> Result<LpModel, ModelError> {
    if fleet.is_empty() {
        return Err(ModelError::EmptyClusters);
    }
    scenario.validate()?;
    let units: Vec<UnitSpec> = fleet
        .iter()
        .map(|v| UnitSpec {
            params: &v.params,
            profile: &v.profile,
            weight: 1.0,
        })
        .collect();
    build(&units, scenario)
}

fn build(units: &[UnitSpec], scenario: &Scenario) -> Result<LpModel, ModelError> {
    let n = scenario.horizon;
    let k = units.len();

    // Tile daily profiles across the horizon and compute driving masks.
    let mut demands: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut driving: Vec<Vec<bool>> = Vec::with_capacity(k);
    for (u, unit) in units.iter().enumerate() {
        let miles: Vec<f64> = if unit.profile.len() == n {
            unit.profile.values().to_vec()
        } else {
            unit.profile
                .tiled(n)
                .map_err(|_| ModelError::BadProfileLength {
                    unit: u,
                    len: unit.profile.len(),
                    horizon: n,
                })?
                .values()
                .to_vec()
        };
        driving.push(miles.iter().map(|&m| m > DRIVING_MILES_EPS).collect());
        demands.push(
            miles
                .iter()
                .map(|&m| m * unit.params.kwh_per_mile)
                .collect(),
        );
    }

    // Row layout: per-unit battery balances, per-PHEV fuel balances, then
    // the hourly cap rows.
    let mut battery_row_base = Vec::with_capacity(k);
    let mut fuel_row_base = Vec::with_capacity(k);
    let mut next_row = 0usize;
    for unit in units.iter() {
        battery_row_base.push(next_row);
        next_row += n;
        if unit.params.tank_gal > 0.0 || unit.params.gen_rate_kwh > 0.0 {
            fuel_row_base.push(Some(next_row));
            next_row += n;
        } else {
            fuel_row_base.push(None);
        }
    }
    let cap_row_base = next_row;
    let num_rows = cap_row_base + n;

    let layout = FleetLayout {
        n,
        units: k,
        weights: units.iter().map(|u| u.weight).collect(),
        charge_eff: units.iter().map(|u| u.params.charge_eff).collect(),
        battery_row_base,
        fuel_row_base,
        cap_row_base,
        driving: driving.clone(),
    };

    let mut rows: Vec<Row> = Vec::with_capacity(num_rows);
    for (u, unit) in units.iter().enumerate() {
        for h in 0..n {
            // s_h - s_{h-1} - eff_c*c_h - eff_g*g_h = -demand_h (+ s_init at h=0)
            let mut rhs = -demands[u][h];
            if h == 0 {
                rhs += unit.params.initial_storage_kwh;
            }
            rows.push(Row {
                kind: RowKind::Equal,
                rhs,
            });
        }
        if layout.fuel_row_base[u].is_some() {
            for h in 0..n {
                let rhs = if h == 0 { unit.params.initial_fuel_gal } else { 0.0 };
                rows.push(Row {
                    kind: RowKind::Equal,
                    rhs,
                });
            }
        }
    }
    for h in 0..n {
        rows.push(Row {
            kind: RowKind::LessEqual,
            rhs: scenario.charge_cap[h],
        });
    }
    debug_assert_eq!(rows.len(), num_rows);

    let mut cols: Vec<Column> = Vec::with_capacity(layout.num_cols());
    for (u, unit) in units.iter().enumerate() {
        let p = unit.params;
        for family in FAMILIES {
            for h in 0..n {
                let is_driving = driving[u][h];
                let column = match family {
                    VarFamily::Storage => {
                        let mut entries = vec![(layout.battery_row(u, h), 1.0)];
                        if h + 1 < n {
                            entries.push((layout.battery_row(u, h + 1), -1.0));
                        }
                        Column {
                            obj: 0.0,
                            lower: 0.0,
                            upper: p.battery_kwh,
                            entries,
                        }
                    }
                    VarFamily::Charge => Column {
                        obj: unit.weight * scenario.elec_price[h],
                        lower: 0.0,
                        upper: if is_driving { 0.0 } else { p.charge_rate_kwh },
                        entries: vec![
                            (layout.battery_row(u, h), -p.charge_eff),
                            (layout.cap_row(h), unit.weight),
                        ],
                    },
                    VarFamily::FuelStorage => {
                        let mut entries = Vec::new();
                        if let Some(row) = layout.fuel_row(u, h) {
                            entries.push((row, 1.0));
                            if h + 1 < n {
                                entries.push((layout.fuel_row(u, h + 1).unwrap(), -1.0));
                            }
                        }
                        Column {
                            obj: 0.0,
                            lower: 0.0,
                            upper: p.tank_gal,
                            entries,
                        }
                    }
                    VarFamily::Fuel => {
                        let mut entries = Vec::new();
                        if let Some(row) = layout.fuel_row(u, h) {
                            entries.push((row, -1.0));
                        }
                        Column {
                            obj: unit.weight * scenario.gas_price[h],
                            lower: 0.0,
                            upper: if is_driving { p.fuel_rate_gal } else { 0.0 },
                            entries,
                        }
                    }
                    VarFamily::Generate => {
                        let mut entries = vec![(layout.battery_row(u, h), -p.gen_eff)];
                        if let Some(row) = layout.fuel_row(u, h) {
                            entries.push((row, p.gallons_per_kwh()));
                        }
                        Column {
                            obj: 0.0,
                            lower: 0.0,
                            upper: if is_driving { p.gen_rate_kwh } else { 0.0 },
                            entries,
                        }
                    }
                };
                cols.push(column);
            }
        }
    }

    Ok(LpModel {
        cols,
        rows,
        layout: Some(layout),
    })
}
