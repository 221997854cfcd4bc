//! Structured access to a solved fleet program: primal schedules per unit,
//! balance-row and cap-row duals, and the certification arithmetic (duality
//! gap, complementary slackness, feasibility residuals).

use super::model::{FleetLayout, LpModel, RowKind, VarFamily};
use super::simplex::{RawSolution, SolveStatus};
use crate::series::{HourlySeries, Unit};
use serde::{Deserialize, Serialize};

/// Relative duality-gap certificate: `|primal - dual| <= GAP_TOL * (1 + |primal|)`.
pub const GAP_TOL: f64 = 1e-6;
/// Complementary-slackness residual bound.
pub const COMP_SLACK_TOL: f64 = 1e-8;
/// Reduced costs smaller than this count as zero in dual-objective terms.
const DUAL_ZERO_TOL: f64 = 1e-11;

/// A solved fleet program, self-contained for serialization: the raw
/// primal/dual arrays plus the layout and the pieces of model data the
/// certification checks need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetSolution {
    pub raw: RawSolution,
    pub layout: FleetLayout,
    /// Row right-hand sides (for the dual objective).
    rhs: Vec<f64>,
    /// Bounds per column (for the dual objective and complementarity).
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FleetSolution {
    pub fn new(model: &LpModel, raw: RawSolution) -> Self {
        let layout = model
            .layout
            .clone()
            .expect("fleet solution requires a fleet-built model");
        FleetSolution {
            raw,
            layout,
            rhs: model.rows.iter().map(|r| r.rhs).collect(),
            lower: model.cols.iter().map(|c| c.lower).collect(),
            upper: model.cols.iter().map(|c| c.upper).collect(),
        }
    }

    pub fn status(&self) -> SolveStatus {
        self.raw.status
    }

    pub fn objective(&self) -> f64 {
        self.raw.objective
    }

    fn family_series(&self, unit: usize, family: VarFamily, si_unit: Unit) -> HourlySeries {
        let n = self.layout.n;
        let values = (0..n)
            .map(|h| self.raw.x[self.layout.col(unit, family, h)])
            // Clamp parasitic negative epsilons out of the primal readout.
            .map(|v| if v.abs() < 1e-12 { 0.0 } else { v })
            .collect();
        HourlySeries::new(si_unit, values).unwrap_or_else(|_| HourlySeries::zeros(si_unit, n))
    }

    pub fn storage(&self, unit: usize) -> HourlySeries {
        self.family_series(unit, VarFamily::Storage, Unit::KilowattHours)
    }

    pub fn charge(&self, unit: usize) -> HourlySeries {
        self.family_series(unit, VarFamily::Charge, Unit::KilowattHours)
    }

    pub fn fuel_storage(&self, unit: usize) -> HourlySeries {
        self.family_series(unit, VarFamily::FuelStorage, Unit::Gallons)
    }

    pub fn fuel(&self, unit: usize) -> HourlySeries {
        self.family_series(unit, VarFamily::Fuel, Unit::Gallons)
    }

    pub fn generate(&self, unit: usize) -> HourlySeries {
        self.family_series(unit, VarFamily::Generate, Unit::KilowattHours)
    }

    /// Battery-balance dual for (unit, hour).
    pub fn lambda_battery(&self, unit: usize, hour: usize) -> f64 {
        self.raw.row_duals[self.layout.battery_row(unit, hour)]
    }

    /// Fuel-balance dual for (unit, hour); zero for units with no tank.
    pub fn lambda_fuel(&self, unit: usize, hour: usize) -> f64 {
        self.layout
            .fuel_row(unit, hour)
            .map(|r| self.raw.row_duals[r])
            .unwrap_or(0.0)
    }

    /// Cap-row dual for an hour (non-positive at an optimum).
    pub fn theta(&self, hour: usize) -> f64 {
        self.raw.row_duals[self.layout.cap_row(hour)]
    }

    /// Multiplier of a driving/parked fixing: the reduced cost of the fixed
    /// column. Returns `None` when the variable is not fixed at that hour.
    pub fn fixing_multiplier(&self, unit: usize, family: VarFamily, hour: usize) -> Option<f64> {
        let j = self.layout.col(unit, family, hour);
        (self.lower[j] == self.upper[j]).then(|| self.raw.reduced_costs[j])
    }

    /// Reduced cost of any column.
    pub fn reduced_cost(&self, unit: usize, family: VarFamily, hour: usize) -> f64 {
        self.raw.reduced_costs[self.layout.col(unit, family, hour)]
    }

    /// Bound-multiplier decomposition of a column's reduced cost: `(nu,
    /// gamma)` with `nu` active at the lower bound and `gamma` at the upper.
    pub fn bound_multipliers(&self, unit: usize, family: VarFamily, hour: usize) -> (f64, f64) {
        let r = self.reduced_cost(unit, family, hour);
        if r >= 0.0 {
            (r, 0.0)
        } else {
            (0.0, -r)
        }
    }

    /// Dual objective value: `y'b` plus reduced-cost contributions at the
    /// active bounds.
    pub fn dual_objective(&self) -> f64 {
        let mut value: f64 = self
            .rhs
            .iter()
            .zip(&self.raw.row_duals)
            .map(|(&b, &y)| b * y)
            .sum();
        for (j, &r) in self.raw.reduced_costs.iter().enumerate() {
            if r > DUAL_ZERO_TOL {
                if self.lower[j].is_finite() {
                    value += r * self.lower[j];
                } else {
                    return f64::NEG_INFINITY; // dual infeasible direction
                }
            } else if r < -DUAL_ZERO_TOL {
                if self.upper[j].is_finite() {
                    value += r * self.upper[j];
                } else {
                    return f64::NEG_INFINITY;
                }
            }
        }
        value
    }

    /// `|primal - dual|`, for the strong-duality certificate.
    pub fn duality_gap(&self) -> f64 {
        (self.raw.objective - self.dual_objective()).abs()
    }

    pub fn gap_certified(&self) -> bool {
        self.duality_gap() <= GAP_TOL * (1.0 + self.raw.objective.abs())
    }

    /// Largest complementary-slackness residual: `theta_h * slack_h` over cap
    /// rows and `r_j * distance-to-nearest-bound` over columns.
    pub fn comp_slack_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let n = self.layout.n;
        for h in 0..n {
            let row = self.layout.cap_row(h);
            let slack = self.rhs[row] - self.raw.row_activity[row];
            worst = worst.max((self.raw.row_duals[row] * slack).abs());
        }
        for (j, &r) in self.raw.reduced_costs.iter().enumerate() {
            if r.abs() <= DUAL_ZERO_TOL {
                continue;
            }
            let x = self.raw.x[j];
            let to_lower = if self.lower[j].is_finite() {
                (x - self.lower[j]).abs()
            } else {
                f64::INFINITY
            };
            let to_upper = if self.upper[j].is_finite() {
                (self.upper[j] - x).abs()
            } else {
                f64::INFINITY
            };
            worst = worst.max((r * to_lower.min(to_upper)).abs());
        }
        worst
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Check a raw solution's primal feasibility against its model.
pub fn primal_feasible(model: &LpModel, raw: &RawSolution, tol: f64) -> bool {
    let (eq, le, bound) = model.residuals(&raw.x);
    eq <= tol && le <= tol && bound <= tol
}
