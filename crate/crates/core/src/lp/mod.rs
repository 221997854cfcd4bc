//! Fleet charging as a bounded linear program: model assembly, a revised
//! simplex solver with exact basic duals, and structured solution views.

mod lu;
pub mod model;
pub mod simplex;
pub mod solution;

pub use model::{build_clp, build_full_lp, Column, FleetLayout, LpModel, ModelError, Row, RowKind, VarFamily};
pub use simplex::{solve, RawSolution, SolveError, SolveStatus, FEASIBILITY_TOL};
pub use solution::{primal_feasible, FleetSolution, COMP_SLACK_TOL, GAP_TOL};

/// Build and solve the clustered program, returning the structured solution.
pub fn solve_clp(
    set: &crate::cluster::ClusterSet,
    scenario: &crate::scenario::Scenario,
) -> Result<FleetSolution, ClpError> {
    let model = build_clp(set, scenario)?;
    let raw = solve(&model)?;
    Ok(FleetSolution::new(&model, raw))
}

#[derive(Debug, thiserror::Error)]
pub enum ClpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
