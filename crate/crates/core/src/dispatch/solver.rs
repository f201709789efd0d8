use std::fmt::Debug;

use crate::registry::Registry;

use super::problem::{battery_power, Problem};
use super::sqp::{solve_sqp, Diagnostics, Solution, SolveStatus, SqpOptions};
use super::{DecisionVector, DispatchError};

/// A method that turns a dispatch problem into a decision vector.
pub trait DispatchSolver: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        problem: &Problem,
        warm_start: Option<&DecisionVector>,
    ) -> Result<Solution, DispatchError>;
}

#[derive(Debug, Clone, Default)]
pub struct SqpSolver {
    pub options: SqpOptions,
}

impl DispatchSolver for SqpSolver {
    fn name(&self) -> &'static str {
        "sqp"
    }

    fn solve(
        &self,
        problem: &Problem,
        warm_start: Option<&DecisionVector>,
    ) -> Result<Solution, DispatchError> {
        solve_sqp(problem, warm_start, &self.options)
    }
}

/// Baseline that keeps the battery idle on the forecast: each interval
/// exports the ensemble-mean net generation, clipped to the grid limit,
/// with no thermal management.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdleSolver;

impl DispatchSolver for IdleSolver {
    fn name(&self) -> &'static str {
        "idle"
    }

    fn solve(
        &self,
        problem: &Problem,
        _warm_start: Option<&DecisionVector>,
    ) -> Result<Solution, DispatchError> {
        let started = std::time::Instant::now();
        let spec = problem.spec();
        let n_di = problem.n_di();
        let limit = spec.limits.p_grid_max;
        let members = spec.ensemble.len() as f64;
        let mut decision = DecisionVector::zeros(problem.blocks());
        for (b, p) in decision.p_grid.iter_mut().enumerate() {
            let mut net = 0.0;
            for member in &spec.ensemble {
                for d in &member[b * n_di..(b + 1) * n_di] {
                    // grid power that leaves zero battery power
                    net += battery_power(&spec.converters, d, 0.0, 0.0) / spec.converters.battery;
                }
            }
            *p = (net / (members * n_di as f64)).clamp(-limit, limit);
        }
        let x = decision.to_vec();
        let eval = problem.evaluate(&x)?;
        decision.slack = eval.required_slack;
        let eval = problem.evaluate(&decision.to_vec())?;
        Ok(Solution {
            decision,
            diagnostics: Diagnostics {
                status: SolveStatus::Converged,
                iterations: 0,
                objective: eval.objective,
                operating_cost: eval.operating_cost,
                max_violation: eval.rows.iter().fold(0.0f64, |a, v| a.max(*v)),
                kkt_residual: f64::NAN,
                evaluations: 2,
                qp_iterations: 0,
                wall_time: started.elapsed().as_secs_f64(),
            },
        })
    }
}

pub fn solver_registry() -> Registry<dyn DispatchSolver, SqpOptions> {
    Registry::new("solver")
        .with("sqp", "elastic SQP with finite-difference derivatives", |opts: &SqpOptions| -> Box<dyn DispatchSolver> {
            Box::new(SqpSolver { options: *opts })
        })
        .with("idle", "battery idle on the mean forecast (baseline)", |_| -> Box<dyn DispatchSolver> { Box::new(IdleSolver) })
}

/// Solves with the default SQP settings.
pub fn solve_dispatch(
    problem: &Problem,
    warm_start: Option<&DecisionVector>,
) -> Result<Solution, DispatchError> {
    SqpSolver::default().solve(problem, warm_start)
}
