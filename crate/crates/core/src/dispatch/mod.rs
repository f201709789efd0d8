//! Two-stage ensemble dispatch: prediction over the committed delay
//! horizon, then a blocked, soft-constrained program over the optimization
//! horizon shared by all ensemble members.

mod cost;
mod horizon;
mod limits;
mod problem;
pub mod qp;
mod solver;
mod sqp;
mod stage1;

use thiserror::Error;

use crate::battery::BatteryError;

pub use cost::{running_cost, CostParams, RunningCost};
pub use horizon::HorizonConfig;
pub use limits::OperatingLimits;
pub use problem::{
    assemble_problem, battery_power, predict_step, ConstraintId, ConstraintKind, Converters,
    DecisionVector, Evaluation, Problem, ProblemSpec, DEFAULT_SMOOTHING, ROWS_PER_STEP,
};
pub use solver::{solve_dispatch, solver_registry, DispatchSolver, IdleSolver, SqpSolver};
pub use sqp::{solve_sqp, Diagnostics, Solution, SolveStatus, SqpOptions};
pub use stage1::stage1_predict;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("member {member}, step {step}: {source}")]
    Model {
        member: usize,
        step: usize,
        #[source]
        source: BatteryError,
    },
    #[error("no feasible point found; worst constraint {constraint} violated by {violation:.3e}")]
    Infeasible {
        constraint: ConstraintId,
        violation: f64,
        best: Box<Solution>,
    },
    #[error("QP subproblem: {0}")]
    Qp(String),
}
