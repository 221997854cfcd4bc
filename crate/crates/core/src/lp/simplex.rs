//! Bounded-variable revised simplex with a phase-1/phase-2 scheme.
//!
//! The solver works on an [`LpModel`](super::model::LpModel): minimize `c'x`
//! subject to equality and `<=` rows with box bounds on every variable
//! (fixings are bounds with `lower == upper`). It reports basic primal and
//! dual solutions; reduced costs of fixed variables double as the
//! multipliers of the fixing constraints.
//!
//! Basis representation: sparse LU refreshed periodically, with product-form
//! eta updates between refactorizations. Dantzig pricing with a Bland
//! fallback once the iteration stalls on degenerate pivots.

use super::lu::{LuError, LuFactors};
use super::model::{LpModel, RowKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute feasibility tolerance on row residuals.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Dual feasibility (pricing) tolerance, scaled by the objective magnitude.
const OPT_TOL: f64 = 1e-9;
/// Smallest pivot element accepted in the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Rebuild the LU after this many eta updates.
const REFACTOR_EVERY: usize = 64;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 2000;
const MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("variable {0} has no finite bound; free variables are unsupported")]
    FreeVariable(usize),
    #[error("variable {col} has crossing bounds [{lower}, {upper}]")]
    CrossingBounds { col: usize, lower: f64, upper: f64 },
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Phase 1 terminated with positive residual; the value is the minimal
    /// total constraint violation and the row duals form the certificate.
    Infeasible { infeasibility: f64 },
    Unbounded,
}

/// Primal/dual output of one solve, in the model's column and row indexing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: f64,
    /// Value per model column.
    pub x: Vec<f64>,
    /// Dual multiplier per row. `<=` rows carry non-positive duals at an
    /// optimum under this sign convention.
    pub row_duals: Vec<f64>,
    /// Reduced cost per model column (`c_j - y'A_j`).
    pub reduced_costs: Vec<f64>,
    /// Row activity `sum_j A_ij x_j` over model columns.
    pub row_activity: Vec<f64>,
    pub iterations: usize,
}

impl RawSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

struct Worker {
    m: usize,
    entries: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    obj: Vec<f64>,
    rhs: Vec<f64>,
    n_model: usize,
    art_start: usize,
    state: Vec<VarState>,
    basis: Vec<usize>,
    x_basic: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
    bland: bool,
    stall: usize,
    iterations: usize,
}

enum StepOutcome {
    Moved,
    PhaseOptimal,
    Unbounded,
}

impl Worker {
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Basic(pos) => self.x_basic[pos],
        }
    }

    fn factorize(&mut self) -> Result<(), LuError> {
        let cols: Vec<&[(usize, f64)]> = self
            .basis
            .iter()
            .map(|&j| self.entries[j].as_slice())
            .collect();
        self.lu = LuFactors::factor(self.m, &cols)?;
        self.etas.clear();
        Ok(())
    }

    /// Recompute basic values from scratch: `x_B = B^{-1}(b - N x_N)`.
    fn recompute_basics(&mut self) {
        let mut rhs = self.rhs.clone();
        for j in 0..self.entries.len() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(row, a) in &self.entries[j] {
                    rhs[row] -= a * v;
                }
            }
        }
        self.x_basic = self.ftran(&rhs);
    }

    fn ftran(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.lu.solve(b);
        for eta in &self.etas {
            let xr = x[eta.pos] / eta.pivot;
            x[eta.pos] = xr;
            if xr != 0.0 {
                for &(i, w) in &eta.others {
                    x[i] -= w * xr;
                }
            }
        }
        x
    }

    fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.pos];
            for &(i, w) in &eta.others {
                acc -= w * c[i];
            }
            c[eta.pos] = acc / eta.pivot;
        }
        self.lu.solve_transpose(&c)
    }

    fn duals(&self) -> Vec<f64> {
        let c_basis: Vec<f64> = self.basis.iter().map(|&j| self.obj[j]).collect();
        self.btran(&c_basis)
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut r = self.obj[j];
        for &(row, a) in &self.entries[j] {
            r -= y[row] * a;
        }
        r
    }

    /// One simplex iteration of the current phase.
    fn step(&mut self) -> Result<StepOutcome, SolveError> {
        let y = self.duals();
        let tol = OPT_TOL * (1.0 + self.obj.iter().fold(0.0f64, |a, &c| a.max(c.abs())));

        // Pricing: pick the entering column.
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..self.entries.len() {
            if self.lower[j] == self.upper[j] {
                continue; // fixed, cannot move
            }
            let violation = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower => {
                    let r = self.reduced_cost(j, &y);
                    if r < -tol {
                        -r
                    } else {
                        continue;
                    }
                }
                VarState::AtUpper => {
                    let r = self.reduced_cost(j, &y);
                    if r > tol {
                        r
                    } else {
                        continue;
                    }
                }
            };
            if self.bland {
                entering = Some((j, violation));
                break;
            }
            match entering {
                Some((_, best)) if violation <= best => {}
                _ => entering = Some((j, violation)),
            }
        }
        let Some((q, violation)) = entering else {
            return Ok(StepOutcome::PhaseOptimal);
        };

        // Direction: +1 when rising from the lower bound, -1 when falling
        // from the upper bound.
        let delta = match self.state[q] {
            VarState::AtLower => 1.0,
            VarState::AtUpper => -1.0,
            VarState::Basic(_) => unreachable!(),
        };

        let mut col_dense = vec![0.0; self.m];
        for &(row, a) in &self.entries[q] {
            col_dense[row] += a;
        }
        let w = self.ftran(&col_dense);

        // Ratio test: how far can q move before a basic variable hits a
        // bound (or q hits its own opposite bound)?
        let own_span = self.upper[q] - self.lower[q]; // may be +inf
        let mut best_ratio = f64::INFINITY;
        let mut leaving: Option<(usize, f64, bool)> = None; // (pos, |d|, hit_lower)
        for (i, &wi) in w.iter().enumerate() {
            let d = delta * wi;
            if d.abs() <= PIVOT_TOL {
                continue;
            }
            let col = self.basis[i];
            let (bound, hit_lower) = if d > 0.0 {
                (self.lower[col], true)
            } else {
                (self.upper[col], false)
            };
            if bound.is_infinite() {
                continue;
            }
            let ratio = ((self.x_basic[i] - bound) / d).max(0.0);
            let close = ratio <= best_ratio + 1e-9 * (1.0 + best_ratio.min(1e12));
            if ratio < best_ratio - 1e-9 * (1.0 + best_ratio.min(1e12))
                || (close
                    && leaving
                        .map(|(_, da, _)| d.abs() > da)
                        .unwrap_or(true))
            {
                if ratio < best_ratio {
                    best_ratio = ratio;
                }
                leaving = Some((i, d.abs(), hit_lower));
            }
        }

        let step = best_ratio.min(own_span);
        if step.is_infinite() {
            return Ok(StepOutcome::Unbounded);
        }
        if step <= 1e-12 {
            self.stall += 1;
            if self.stall > STALL_LIMIT {
                self.bland = true;
            }
        } else {
            self.stall = 0;
        }

        // Apply the move to the basic values.
        if step != 0.0 {
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    self.x_basic[i] -= step * delta * wi;
                }
            }
        }

        if own_span <= best_ratio {
            // Bound flip: q jumps to its other bound, basis unchanged.
            self.state[q] = match self.state[q] {
                VarState::AtLower => VarState::AtUpper,
                VarState::AtUpper => VarState::AtLower,
                VarState::Basic(_) => unreachable!(),
            };
        } else {
            let (r, _, hit_lower) = leaving.expect("finite ratio implies a blocking row");
            if w[r].abs() <= PIVOT_TOL * 1e-3 {
                return Err(SolveError::Numerical(format!(
                    "pivot element {:.3e} too small at iteration {}",
                    w[r], self.iterations
                )));
            }
            let start = match self.state[q] {
                VarState::AtLower => self.lower[q],
                VarState::AtUpper => self.upper[q],
                VarState::Basic(_) => unreachable!(),
            };
            let leaving_col = self.basis[r];
            self.state[leaving_col] = if hit_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.state[q] = VarState::Basic(r);
            self.basis[r] = q;
            self.x_basic[r] = start + delta * step;

            let others: Vec<(usize, f64)> = w
                .iter()
                .enumerate()
                .filter(|&(i, &wi)| i != r && wi != 0.0)
                .map(|(i, &wi)| (i, wi))
                .collect();
            self.etas.push(Eta {
                pos: r,
                pivot: w[r],
                others,
            });
            if self.etas.len() >= REFACTOR_EVERY {
                self.factorize()
                    .map_err(|e| SolveError::Numerical(e.to_string()))?;
                self.recompute_basics();
            }
        }

        self.iterations += 1;
        let _ = violation;
        Ok(StepOutcome::Moved)
    }

    fn run_phase(&mut self) -> Result<StepOutcome, SolveError> {
        loop {
            if self.iterations > MAX_ITERATIONS {
                return Err(SolveError::IterationLimit(self.iterations));
            }
            match self.step()? {
                StepOutcome::Moved => continue,
                done => return Ok(done),
            }
        }
    }
}

/// Solve a model to proven optimality (or report infeasibility or
/// unboundedness with the corresponding certificate data).
pub fn solve(model: &LpModel) -> Result<RawSolution, SolveError> {
    let m = model.rows.len();
    let n_model = model.cols.len();

    // Assemble the working column set: model columns, then slacks for `<=`
    // rows, then artificials as needed for a starting basis.
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_model + m);
    let mut lower = Vec::with_capacity(n_model + m);
    let mut upper = Vec::with_capacity(n_model + m);
    for (j, col) in model.cols.iter().enumerate() {
        if col.lower > col.upper {
            return Err(SolveError::CrossingBounds {
                col: j,
                lower: col.lower,
                upper: col.upper,
            });
        }
        if col.lower.is_infinite() && col.upper.is_infinite() {
            return Err(SolveError::FreeVariable(j));
        }
        entries.push(col.entries.clone());
        lower.push(col.lower);
        upper.push(col.upper);
    }

    let mut state = vec![VarState::AtLower; n_model];
    for j in 0..n_model {
        if lower[j].is_finite() {
            state[j] = VarState::AtLower;
        } else {
            state[j] = VarState::AtUpper;
        }
    }

    // Initial activity of each row with every structural column at its bound.
    let mut activity = vec![0.0; m];
    for j in 0..n_model {
        let v = match state[j] {
            VarState::AtLower => lower[j],
            VarState::AtUpper => upper[j],
            VarState::Basic(_) => unreachable!(),
        };
        if v != 0.0 {
            for &(row, a) in &entries[j] {
                activity[row] += a * v;
            }
        }
    }

    let mut slack_of_row = vec![usize::MAX; m];
    for (i, row) in model.rows.iter().enumerate() {
        if row.kind == RowKind::LessEqual {
            slack_of_row[i] = entries.len();
            entries.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            state.push(VarState::AtLower);
        }
    }

    let art_start = entries.len();
    let mut basis = vec![usize::MAX; m];
    let mut x_basic = vec![0.0; m];
    let mut any_artificial = false;
    for (i, row) in model.rows.iter().enumerate() {
        let residual = row.rhs - activity[i];
        if row.kind == RowKind::LessEqual && residual >= 0.0 {
            // The slack itself closes the row.
            let s = slack_of_row[i];
            state[s] = VarState::Basic(i);
            basis[i] = s;
            x_basic[i] = residual;
        } else {
            let sign = if residual < 0.0 { -1.0 } else { 1.0 };
            let a = entries.len();
            entries.push(vec![(i, sign)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            state.push(VarState::Basic(i));
            basis[i] = a;
            x_basic[i] = residual.abs();
            any_artificial = true;
        }
    }

    let n_total = entries.len();
    let rhs: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();

    let mut worker = Worker {
        m,
        entries,
        lower,
        upper,
        obj: vec![0.0; n_total],
        rhs,
        n_model,
        art_start,
        state,
        basis,
        x_basic,
        lu: LuFactors::factor(0, &[]).expect("empty factorization"),
        etas: Vec::new(),
        bland: false,
        stall: 0,
        iterations: 0,
    };
    worker
        .factorize()
        .map_err(|e| SolveError::Numerical(format!("initial basis: {e}")))?;

    // Phase 1: minimize total artificial mass.
    if any_artificial {
        for j in worker.art_start..n_total {
            worker.obj[j] = 1.0;
        }
        match worker.run_phase()? {
            StepOutcome::PhaseOptimal => {}
            StepOutcome::Unbounded => {
                return Err(SolveError::Numerical(
                    "phase 1 reported unbounded".to_string(),
                ))
            }
            StepOutcome::Moved => unreachable!(),
        }
        worker.recompute_basics();
        let infeasibility: f64 = (worker.art_start..n_total)
            .map(|j| worker.nonbasic_value(j).max(0.0))
            .sum();
        let scale = 1.0 + worker.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(finish(
                model,
                &mut worker,
                SolveStatus::Infeasible { infeasibility },
            ));
        }
        // Pin artificials at zero for phase 2.
        for j in worker.art_start..n_total {
            worker.obj[j] = 0.0;
            worker.upper[j] = 0.0;
        }
    }

    // Phase 2: the real objective.
    for (j, col) in model.cols.iter().enumerate() {
        worker.obj[j] = col.obj;
    }
    worker.bland = false;
    worker.stall = 0;
    let status = match worker.run_phase()? {
        StepOutcome::PhaseOptimal => SolveStatus::Optimal,
        StepOutcome::Unbounded => SolveStatus::Unbounded,
        StepOutcome::Moved => unreachable!(),
    };

    Ok(finish(model, &mut worker, status))
}

/// Refactor the terminal basis and read out clean primal and dual values.
fn finish(model: &LpModel, worker: &mut Worker, status: SolveStatus) -> RawSolution {
    if worker.factorize().is_ok() {
        worker.recompute_basics();
    }
    let y = worker.duals();

    let mut x = vec![0.0; worker.n_model];
    for (j, value) in x.iter_mut().enumerate() {
        *value = worker.nonbasic_value(j);
    }
    let reduced_costs: Vec<f64> = (0..worker.n_model)
        .map(|j| worker.reduced_cost(j, &y))
        .collect();
    let objective: f64 = model
        .cols
        .iter()
        .zip(&x)
        .map(|(col, &v)| col.obj * v)
        .sum();
    let mut row_activity = vec![0.0; worker.m];
    for (j, &v) in x.iter().enumerate() {
        if v != 0.0 {
            for &(row, a) in &worker.entries[j] {
                row_activity[row] += a * v;
            }
        }
    }

    RawSolution {
        status,
        objective,
        x,
        row_duals: y,
        reduced_costs,
        row_activity,
        iterations: worker.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::model::{Column, LpModel, Row};

    fn lp(cols: Vec<Column>, rows: Vec<Row>) -> LpModel {
        LpModel {
            cols,
            rows,
            layout: None,
        }
    }

    fn col(obj: f64, lower: f64, upper: f64, entries: Vec<(usize, f64)>) -> Column {
        Column {
            obj,
            lower,
            upper,
            entries,
        }
    }

    #[test]
    fn single_bounded_variable() {
        // min x, 1 <= x <= 2: optimum at the lower bound with reduced cost 1.
        let model = lp(vec![col(1.0, 1.0, 2.0, vec![])], vec![]);
        let sol = solve(&model).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.x, vec![1.0]);
        assert_eq!(sol.objective, 1.0);
        assert!((sol.reduced_costs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximize_via_negative_cost_hits_upper_bound() {
        let model = lp(vec![col(-3.0, 0.0, 5.0, vec![])], vec![]);
        let sol = solve(&model).unwrap();
        assert_eq!(sol.x, vec![5.0]);
        assert_eq!(sol.objective, -15.0);
        assert!(sol.reduced_costs[0] < 0.0);
    }

    #[test]
    fn textbook_inequality_lp() {
        // max 4x + 3y s.t. x - y <= 1, 2x - y <= 3, y <= 5 (as min of the
        // negation); optimum (4, 5), objective 31.
        let model = lp(
            vec![
                col(-4.0, 0.0, f64::INFINITY, vec![(0, 1.0), (1, 2.0)]),
                col(-3.0, 0.0, f64::INFINITY, vec![(0, -1.0), (1, -1.0), (2, 1.0)]),
            ],
            vec![
                Row {
                    kind: RowKind::LessEqual,
                    rhs: 1.0,
                },
                Row {
                    kind: RowKind::LessEqual,
                    rhs: 3.0,
                },
                Row {
                    kind: RowKind::LessEqual,
                    rhs: 5.0,
                },
            ],
        );
        let sol = solve(&model).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective + 31.0).abs() < 1e-9);
        assert!((sol.x[0] - 4.0).abs() < 1e-9);
        assert!((sol.x[1] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_via_phase_one() {
        // min 2x + 3y s.t. x + y = 4, x - y = 0 -> x = y = 2.
        let model = lp(
            vec![
                col(2.0, 0.0, 10.0, vec![(0, 1.0), (1, 1.0)]),
                col(3.0, 0.0, 10.0, vec![(0, 1.0), (1, -1.0)]),
            ],
            vec![
                Row {
                    kind: RowKind::Equal,
                    rhs: 4.0,
                },
                Row {
                    kind: RowKind::Equal,
                    rhs: 0.0,
                },
            ],
        );
        let sol = solve(&model).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
        assert!((sol.objective - 10.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x <= -1 with x >= 0.
        let model = lp(
            vec![col(1.0, 0.0, f64::INFINITY, vec![(0, 1.0)])],
            vec![Row {
                kind: RowKind::LessEqual,
                rhs: -1.0,
            }],
        );
        let sol = solve(&model).unwrap();
        match sol.status {
            SolveStatus::Infeasible { infeasibility } => {
                assert!(infeasibility > 0.9, "violation should be about 1");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_unbounded() {
        // min -x with x unbounded above and a non-binding row.
        let model = lp(
            vec![col(-1.0, 0.0, f64::INFINITY, vec![(0, -1.0)])],
            vec![Row {
                kind: RowKind::LessEqual,
                rhs: 1.0,
            }],
        );
        let sol = solve(&model).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn fixed_variables_participate_in_rows() {
        // x fixed at 2, min y with x + y = 5 -> y = 3; the fixed column's
        // reduced cost is the multiplier of its fixing.
        let model = lp(
            vec![
                col(0.0, 2.0, 2.0, vec![(0, 1.0)]),
                col(1.0, 0.0, 10.0, vec![(0, 1.0)]),
            ],
            vec![Row {
                kind: RowKind::Equal,
                rhs: 5.0,
            }],
        );
        let sol = solve(&model).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 3.0).abs() < 1e-9);
        // y basic => its reduced cost 0 => dual = 1 => fixed col r = -1.
        assert!((sol.reduced_costs[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_less_equal_needs_artificial() {
        // -x <= -3 means x >= 3.
        let model = lp(
            vec![col(1.0, 0.0, 10.0, vec![(0, -1.0)])],
            vec![Row {
                kind: RowKind::LessEqual,
                rhs: -3.0,
            }],
        );
        let sol = solve(&model).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Multiple redundant rows through the same vertex.
        let model = lp(
            vec![
                col(-1.0, 0.0, 10.0, vec![(0, 1.0), (1, 1.0), (2, 1.0)]),
                col(-1.0, 0.0, 10.0, vec![(0, 1.0), (1, 1.0), (2, 0.0)]),
            ],
            vec![
                Row {
                    kind: RowKind::LessEqual,
                    rhs: 4.0,
                },
                Row {
                    kind: RowKind::LessEqual,
                    rhs: 4.0,
                },
                Row {
                    kind: RowKind::LessEqual,
                    rhs: 4.0,
                },
            ],
        );
        let sol = solve(&model).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective + 4.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_path() {
        // min -x - 10y, x + y <= 3, x <= 2, y <= 2: forces both a pivot and
        // a bound interaction.
        let model = lp(
            vec![
                col(-1.0, 0.0, 2.0, vec![(0, 1.0)]),
                col(-10.0, 0.0, 2.0, vec![(0, 1.0)]),
            ],
            vec![Row {
                kind: RowKind::LessEqual,
                rhs: 3.0,
            }],
        );
        let sol = solve(&model).unwrap();
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective + 21.0).abs() < 1e-9);
    }
}
