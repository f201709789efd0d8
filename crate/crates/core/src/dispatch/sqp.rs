//! Elastic SQP with BFGS curvature and finite-difference derivatives.
//!
//! Each iteration linearizes the rollout by forward differences (restarting
//! every perturbed column at its own dispatch interval), solves a convex QP
//! in which the hard rows share one elastic variable, and globalizes with an
//! l1 merit trust region plus a second-order correction. The slack block of the Hessian is exact; the
//! control block is a damped BFGS approximation.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{Problem, Trace, ROWS_PER_STEP};
use super::qp::{solve_qp, QuadraticProgram};
use super::{DecisionVector, DispatchError};

const INITIAL_RADIUS: f64 = 2.0;
const MAX_RADIUS: f64 = 50.0;
const MIN_RADIUS: f64 = 1e-9;
const ACCEPT_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqpOptions {
    pub max_iterations: usize,
    /// Largest admissible constraint violation.
    pub constraint_tol: f64,
    /// Relative objective change regarded as stagnation.
    pub objective_tol: f64,
    /// Stationarity tolerance, relative to `max(1, |f|)`.
    pub kkt_tol: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
    /// Cost of the elastic variable on the hard rows.
    pub elastic_weight: f64,
    /// Rows further than this fraction of their band from activity are left
    /// out of the QP until a step would cross them.
    pub screening: f64,
    /// Initial curvature of the control block.
    pub initial_hessian: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            constraint_tol: 1e-6,
            objective_tol: 1e-8,
            kkt_tol: 1e-6,
            fd_step: 1e-6,
            elastic_weight: 1e6,
            screening: 0.1,
            initial_hessian: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    /// Iteration cap or collapsed trust region; the best feasible iterate is
    /// returned.
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub operating_cost: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    /// Horizon rollouts, including finite-difference columns.
    pub evaluations: usize,
    pub qp_iterations: usize,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub decision: DecisionVector,
    pub diagnostics: Diagnostics,
}

struct Point {
    x: Vec<f64>,
    trace: Trace,
    raw: Vec<f64>,
    rows: Vec<f64>,
    operating: f64,
    f: f64,
    l1: f64,
    max_violation: f64,
}

impl Point {
    fn merit(&self, nu: f64) -> f64 {
        self.f + nu * self.l1
    }
}

struct Sqp<'a> {
    problem: &'a Problem,
    opts: &'a SqpOptions,
    lb: Vec<f64>,
    ub: Vec<f64>,
    free: Vec<usize>,
    evaluations: usize,
}

struct Step {
    d: Vec<f64>,
    lambda: Vec<f64>,
    kkt: f64,
    qp_iterations: usize,
}

impl<'a> Sqp<'a> {
    fn project(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = if self.ub[i] - self.lb[i] <= 1e-12 {
                self.lb[i]
            } else {
                x[i].clamp(self.lb[i], self.ub[i])
            };
        }
    }

    fn point(&mut self, mut x: Vec<f64>) -> Result<Point, DispatchError> {
        self.project(&mut x);
        let mut trace = self.problem.new_trace();
        let mut raw = vec![0.0; self.problem.n_rows()];
        self.evaluations += 1;
        self.problem.simulate(&x, 0, &mut trace, &mut raw)?;
        Ok(self.finish(x, trace, raw))
    }

    fn finish(&self, x: Vec<f64>, trace: Trace, raw: Vec<f64>) -> Point {
        let eps = self.problem.slacks(&x);
        let mut rows = raw.clone();
        self.problem.relax(&mut rows, &eps);
        let operating = self.problem.operating_cost(&trace);
        let f = operating + self.problem.spec().cost.slack_penalty(&eps);
        let l1 = rows.iter().map(|v| v.max(0.0)).sum();
        let max_violation = rows.iter().fold(0.0f64, |m, v| m.max(*v));
        Point {
            x,
            trace,
            raw,
            rows,
            operating,
            f,
            l1,
            max_violation,
        }
    }

    /// Sets every slack to the smallest value that satisfies its rows.
    fn reset_slacks(&self, p: Point) -> Point {
        let req = self.problem.required_slack(&p.raw);
        let mut x = p.x;
        let o = self.problem.slack_offset();
        x[o..o + 4].copy_from_slice(&req);
        self.finish(x, p.trace, p.raw)
    }

    fn feasible(&self, p: &Point) -> bool {
        p.max_violation <= self.opts.constraint_tol
    }

    /// Objective gradient and constraint Jacobian at `p`.
    fn linearize(&mut self, p: &Point) -> (Vec<f64>, DMatrix<f64>) {
        let problem = self.problem;
        let n = problem.n_vars();
        let blocks = problem.blocks();
        let rows = problem.n_rows();
        let mut grad = vec![0.0; n];
        let mut jac = DMatrix::zeros(rows, n);
        let dynamic: Vec<usize> = self.free.iter().copied().filter(|&v| v < 2 * blocks).collect();
        let opts = self.opts;
        let ub = &self.ub;
        let columns: Vec<(usize, f64, Vec<f64>)> = dynamic
            .par_iter()
            .map(|&v| {
                let block = v % blocks;
                let scale = if v < blocks { 1.0 } else { 0.1 };
                let mut h = opts.fd_step * p.x[v].abs().max(scale);
                if p.x[v] + h > ub[v] {
                    h = -h;
                }
                let attempt = |h: f64| {
                    let mut x = p.x.clone();
                    x[v] += h;
                    let mut trace = p.trace.clone();
                    let mut raw = p.raw.clone();
                    problem
                        .simulate(&x, block, &mut trace, &mut raw)
                        .map(|_| (h, problem.operating_cost(&trace), raw))
                };
                match attempt(h).or_else(|_| attempt(-h)) {
                    Ok((h, f, raw)) => {
                        let col = raw.iter().zip(&p.raw).map(|(a, b)| (a - b) / h).collect();
                        (v, (f - p.operating) / h, col)
                    }
                    Err(_) => (v, 0.0, vec![0.0; rows]),
                }
            })
            .collect();
        self.evaluations += dynamic.len();
        for (v, g, col) in columns {
            grad[v] = g;
            jac.column_mut(v).copy_from_slice(&col);
        }
        let o = problem.slack_offset();
        let eps = problem.slacks(&p.x);
        let sg = problem.spec().cost.slack_gradient(&eps);
        grad[o..o + 4].copy_from_slice(&sg);
        for r in 0..rows {
            let k = r % ROWS_PER_STEP;
            if k >= 6 {
                jac[(r, o + k - 6)] = -1.0;
            }
        }
        (grad, jac)
    }

    /// Solves the elastic QP subproblem, growing the screened row set until
    /// no left-out row is violated by the linearized step.
    /// `rows` holds the constant term of the linearized rows and `radius`
    /// bounds the control step in units of [`Sqp::step_scale`].
    fn subproblem(
        &self,
        p: &Point,
        rows_c: &[f64],
        grad: &[f64],
        jac: &DMatrix<f64>,
        hess: &DMatrix<f64>,
        radius: f64,
    ) -> Result<Step, DispatchError> {
        let problem = self.problem;
        let limits = &problem.spec().limits;
        let n = problem.n_vars();
        let nf = self.free.len();
        let rows = problem.n_rows();
        let mut active: Vec<bool> = (0..rows)
            .map(|r| rows_c[r] >= -self.opts.screening * problem.row_kind(r).range(limits))
            .collect();
        let mut qp_iterations = 0;
        for _round in 0..8 {
            let act: Vec<usize> = (0..rows).filter(|&r| active[r]).collect();
            // (position, sign, bound, set by the trust region)
            let mut boxes: Vec<(usize, f64, f64, bool)> = Vec::new();
            for (pos, &i) in self.free.iter().enumerate() {
                let tr = self.step_scale(i) * radius;
                let up = self.ub[i] - p.x[i];
                let down = p.x[i] - self.lb[i];
                if up.is_finite() || tr.is_finite() {
                    boxes.push((pos, 1.0, up.min(tr), tr < up));
                }
                if down.is_finite() || tr.is_finite() {
                    boxes.push((pos, -1.0, down.min(tr), tr < down));
                }
            }
            let m = act.len() + 1 + boxes.len();
            let mut g = DMatrix::zeros(m, nf + 1);
            let mut b = DVector::zeros(m);
            for (k, &r) in act.iter().enumerate() {
                for (pos, &i) in self.free.iter().enumerate() {
                    g[(k, pos)] = jac[(r, i)];
                }
                if r % ROWS_PER_STEP < 6 {
                    g[(k, nf)] = -1.0;
                }
                b[k] = -rows_c[r];
            }
            g[(act.len(), nf)] = -1.0;
            for (k, &(pos, sign, bound, _)) in boxes.iter().enumerate() {
                g[(act.len() + 1 + k, pos)] = sign;
                b[act.len() + 1 + k] = bound.max(0.0);
            }
            let mut h = DMatrix::zeros(nf + 1, nf + 1);
            h.view_mut((0, 0), (nf, nf)).copy_from(hess);
            h[(nf, nf)] = 1e-10;
            let mut c = DVector::zeros(nf + 1);
            for (pos, &i) in self.free.iter().enumerate() {
                c[pos] = grad[i];
            }
            c[nf] = self.opts.elastic_weight;
            let qp = QuadraticProgram::new(h, c, g, b);
            let sol = solve_qp(&qp)?;
            qp_iterations += sol.iterations;
            let mut d = vec![0.0; n];
            for (pos, &i) in self.free.iter().enumerate() {
                d[i] = sol.x[pos];
            }
            let tau = sol.x[nf].max(0.0);
            let dv = DVector::from_column_slice(&d);
            let jd = jac * &dv;
            let mut grown = false;
            for r in 0..rows {
                if !active[r] {
                    let allowance = if r % ROWS_PER_STEP < 6 { tau } else { 0.0 };
                    if rows_c[r] + jd[r] > allowance + 1e-9 {
                        active[r] = true;
                        grown = true;
                    }
                }
            }
            if grown {
                continue;
            }
            let mut lambda = vec![0.0; rows];
            for (k, &r) in act.iter().enumerate() {
                lambda[r] = sol.z[k];
            }
            // stationarity of the Lagrangian at the current point
            let mut resid: Vec<f64> = self.free.iter().map(|&i| grad[i]).collect();
            for (k, &r) in act.iter().enumerate() {
                let z = sol.z[k];
                if z != 0.0 {
                    for (pos, &i) in self.free.iter().enumerate() {
                        resid[pos] += z * jac[(r, i)];
                    }
                }
            }
            for (k, &(pos, sign, _, tr)) in boxes.iter().enumerate() {
                if !tr {
                    resid[pos] += sign * sol.z[act.len() + 1 + k];
                }
            }
            let kkt = resid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            return Ok(Step {
                d,
                lambda,
                kkt,
                qp_iterations,
            });
        }
        Err(DispatchError::Qp("active-set screening did not settle".into()))
    }

    /// Natural size of a step in variable `i`; slacks are not
    /// trust-region bounded.
    fn step_scale(&self, i: usize) -> f64 {
        let blocks = self.problem.blocks();
        if i < blocks {
            1.0
        } else if i < 2 * blocks {
            0.1
        } else {
            f64::INFINITY
        }
    }

    /// Largest scaled component of a control step.
    fn step_norm(&self, d: &[f64]) -> f64 {
        (0..2 * self.problem.blocks()).fold(0.0f64, |a, i| a.max(d[i].abs() / self.step_scale(i)))
    }

    fn lagrangian_gradient(&self, grad: &[f64], jac: &DMatrix<f64>, lambda: &[f64]) -> Vec<f64> {
        let lam = DVector::from_column_slice(lambda);
        let jt = jac.tr_mul(&lam);
        grad.iter().zip(jt.iter()).map(|(g, j)| g + j).collect()
    }
}

/// Damped BFGS update of `hess` on the positions `idx`.
fn bfgs_update(hess: &mut DMatrix<f64>, idx: &[usize], s: &[f64], y: &[f64], first: bool) {
    let k = idx.len();
    if k == 0 {
        return;
    }
    let s = DVector::from_column_slice(s);
    let mut y = DVector::from_column_slice(y);
    let sy = s.dot(&y);
    if first && sy > 0.0 {
        let scale = (y.dot(&y) / sy).clamp(1e-6, 1e6);
        for &a in idx {
            for &b in idx {
                hess[(a, b)] = if a == b { scale } else { 0.0 };
            }
        }
    }
    let mut b = DMatrix::zeros(k, k);
    for (r, &a) in idx.iter().enumerate() {
        for (c, &bb) in idx.iter().enumerate() {
            b[(r, c)] = hess[(a, bb)];
        }
    }
    let bs = &b * &s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) {
        return;
    }
    let mut sy = s.dot(&y);
    if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y = theta * y + (1.0 - theta) * &bs;
        sy = s.dot(&y);
    }
    if !(sy > 1e-300) {
        return;
    }
    let update = &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
    b += update;
    for (r, &a) in idx.iter().enumerate() {
        for (c, &bb) in idx.iter().enumerate() {
            hess[(a, bb)] = b[(r, c)];
        }
    }
}

/// Solves `problem` from `warm_start` (or from zero controls).
pub fn solve_sqp(
    problem: &Problem,
    warm_start: Option<&DecisionVector>,
    opts: &SqpOptions,
) -> Result<Solution, DispatchError> {
    let started = Instant::now();
    let n = problem.n_vars();
    let (lb, ub) = problem.bounds();
    let free: Vec<usize> = (0..n).filter(|&i| ub[i] - lb[i] > 1e-12).collect();
    let mut sqp = Sqp {
        problem,
        opts,
        lb,
        ub,
        free,
        evaluations: 0,
    };
    let cold = vec![0.0; n];
    let warm = warm_start
        .filter(|w| w.len() == n)
        .map(DecisionVector::to_vec);
    let first = match warm {
        Some(x) => sqp.point(x).or_else(|_| sqp.point(cold.clone()))?,
        None => sqp.point(cold)?,
    };
    let mut pt = sqp.reset_slacks(first);

    let nf = sqp.free.len();
    let blocks = problem.blocks();
    let o = problem.slack_offset();
    let dyn_pos: Vec<usize> = (0..nf).filter(|&p| sqp.free[p] < 2 * blocks).collect();
    let mut hess = DMatrix::zeros(nf, nf);
    for &p in &dyn_pos {
        hess[(p, p)] = opts.initial_hessian;
    }
    let sh = problem.spec().cost.slack_hessian();
    for (pa, &a) in sqp.free.iter().enumerate() {
        for (pb, &b) in sqp.free.iter().enumerate() {
            if a >= o && b >= o {
                hess[(pa, pb)] = sh[a - o][b - o];
            }
        }
    }

    let mut nu = 1.0_f64;
    let mut radius = INITIAL_RADIUS;
    let mut status = SolveStatus::Degraded;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    let mut qp_iterations = 0;
    let mut model: Option<(Vec<f64>, DMatrix<f64>)> = None;
    let mut pending: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut first_update = true;
    let mut flat_steps = 0;
    let mut best: Option<Point> = None;

    for iter in 0..opts.max_iterations {
        iterations = iter;
        if model.is_none() {
            let (grad, jac) = sqp.linearize(&pt);
            if let Some((s, lambda, gl_old)) = pending.take() {
                let gl_new = sqp.lagrangian_gradient(&grad, &jac, &lambda);
                let sv: Vec<f64> = dyn_pos.iter().map(|&p| s[sqp.free[p]]).collect();
                let yv: Vec<f64> = dyn_pos
                    .iter()
                    .map(|&p| gl_new[sqp.free[p]] - gl_old[sqp.free[p]])
                    .collect();
                bfgs_update(&mut hess, &dyn_pos, &sv, &yv, first_update);
                first_update = false;
            }
            model = Some((grad, jac));
        }
        let (grad, jac) = model.as_ref().expect("model was just built");
        let step = sqp.subproblem(&pt, &pt.rows, grad, jac, &hess, radius)?;
        qp_iterations += step.qp_iterations;
        kkt = step.kkt;
        let scale = pt.f.abs().max(1.0);
        let dnorm = sqp.step_norm(&step.d);
        let xnorm = pt.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if sqp.feasible(&pt) && (kkt <= opts.kkt_tol * scale || dnorm <= 1e-10 * (1.0 + xnorm)) {
            status = SolveStatus::Converged;
            break;
        }
        let lam_max = step.lambda.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        nu = nu.max(1.1 * lam_max + 1e-3);
        let merit = pt.merit(nu);
        let dvec = DVector::from_column_slice(&step.d);
        let jd = jac * &dvec;
        let lin_l1: f64 = pt.rows.iter().zip(jd.iter()).map(|(r, j)| (r + j).max(0.0)).sum();
        let gd: f64 = grad.iter().zip(&step.d).map(|(g, d)| g * d).sum();
        let dfree = DVector::from_iterator(nf, sqp.free.iter().map(|&i| step.d[i]));
        let quad = gd + 0.5 * dfree.dot(&(&hess * &dfree));
        let pred = -quad + nu * (pt.l1 - lin_l1);
        if !(pred > 1e-14 * (1.0 + merit.abs())) {
            if sqp.feasible(&pt) {
                status = SolveStatus::Converged;
            }
            break;
        }
        let ratio = |c: &Point| (merit - c.merit(nu)) / pred;
        let trial = |sqp: &mut Sqp, d: &[f64]| {
            let xt: Vec<f64> = pt.x.iter().zip(d).map(|(x, d)| x + d).collect();
            sqp.point(xt).ok().map(|c| sqp.reset_slacks(c))
        };
        let mut accepted = None;
        let mut rho = f64::NEG_INFINITY;
        if let Some(cand) = trial(&mut sqp, &step.d) {
            rho = ratio(&cand);
            if rho >= ACCEPT_RATIO {
                accepted = Some(cand);
            } else {
                // second-order correction against curvature of the rows
                let eps = problem.slacks(&pt.x);
                let mut corrected = cand.raw.clone();
                problem.relax(&mut corrected, &eps);
                let mut jd_dyn = jd.clone();
                for r in 0..jd_dyn.len() {
                    if r % ROWS_PER_STEP >= 6 {
                        jd_dyn[r] += step.d[o + r % ROWS_PER_STEP - 6];
                    }
                }
                for (c, j) in corrected.iter_mut().zip(jd_dyn.iter()) {
                    *c -= j;
                }
                if let Ok(soc) = sqp.subproblem(&pt, &corrected, grad, jac, &hess, radius) {
                    qp_iterations += soc.qp_iterations;
                    if let Some(c2) = trial(&mut sqp, &soc.d) {
                        let r2 = ratio(&c2);
                        if r2 >= ACCEPT_RATIO {
                            rho = r2;
                            accepted = Some(c2);
                        }
                    }
                }
            }
        }
        iterations = iter + 1;
        let Some(next) = accepted else {
            radius = 0.25 * dnorm.min(radius);
            if radius < MIN_RADIUS {
                if sqp.feasible(&pt) && kkt <= 1e-3 * scale {
                    status = SolveStatus::Converged;
                }
                break;
            }
            continue;
        };
        if rho < 0.25 {
            radius = 0.25 * dnorm.min(radius);
        } else if rho > 0.75 && dnorm >= 0.99 * radius {
            radius = (2.0 * radius).min(MAX_RADIUS);
        }
        radius = radius.max(10.0 * MIN_RADIUS);
        let s: Vec<f64> = next.x.iter().zip(&pt.x).map(|(a, b)| a - b).collect();
        let gl_old = sqp.lagrangian_gradient(grad, jac, &step.lambda);
        pending = Some((s, step.lambda, gl_old));
        model = None;
        let df = (next.f - pt.f).abs();
        flat_steps = if sqp.feasible(&next) && df <= opts.objective_tol * scale {
            flat_steps + 1
        } else {
            0
        };
        let previous = std::mem::replace(&mut pt, next);
        if sqp.feasible(&previous) && best.as_ref().is_none_or(|b| previous.f < b.f) {
            best = Some(previous);
        }
        if flat_steps >= 2 {
            status = SolveStatus::Converged;
            break;
        }
    }

    if !sqp.feasible(&pt) {
        if let Some(b) = best.take() {
            pt = b;
            status = SolveStatus::Degraded;
        }
    } else if let Some(b) = best.take() {
        if b.f < pt.f - opts.objective_tol * pt.f.abs().max(1.0) {
            pt = b;
        }
    }
    let diagnostics = Diagnostics {
        status,
        iterations,
        objective: pt.f,
        operating_cost: pt.operating,
        max_violation: pt.max_violation,
        kkt_residual: kkt,
        evaluations: sqp.evaluations,
        qp_iterations,
        wall_time: started.elapsed().as_secs_f64(),
    };
    let solution = Solution {
        decision: DecisionVector::from_slice(&pt.x)?,
        diagnostics,
    };
    if !sqp.feasible(&pt) {
        let (violation, row) = pt
            .rows
            .iter()
            .enumerate()
            .fold((f64::NEG_INFINITY, 0), |acc, (r, &v)| if v > acc.0 { (v, r) } else { acc });
        return Err(DispatchError::Infeasible {
            constraint: problem.row_id(row),
            violation,
            best: Box::new(solution),
        });
    }
    Ok(solution)
}
