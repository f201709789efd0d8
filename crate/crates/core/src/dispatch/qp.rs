//! Dense primal-dual interior-point method for small convex QPs.
//!
//! Solves `min 1/2 x'Hx + c'x  s.t.  Gx <= b` with Mehrotra's
//! predictor-corrector on the normal equations. Sized for a few dozen
//! variables and a few thousand rows.

use nalgebra::{DMatrix, DVector};

use super::DispatchError;

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Tolerance on the residuals and the complementarity gap, relative to
    /// the size of `c` and `b`.
    pub tolerance: f64,
}

impl QuadraticProgram {
    pub fn new(h: DMatrix<f64>, c: DVector<f64>, g: DMatrix<f64>, b: DVector<f64>) -> Self {
        Self {
            h,
            c,
            g,
            b,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the rows of `G`, non-negative.
    pub z: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_ITERATIONS: usize = 100;

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(1.0, f64::min)
}

pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution, DispatchError> {
    let n = qp.c.len();
    let p = qp.b.len();
    if qp.h.shape() != (n, n) || qp.g.shape() != (p, n) {
        return Err(DispatchError::Qp("inconsistent dimensions".into()));
    }
    if p == 0 {
        let chol = qp
            .h
            .clone()
            .cholesky()
            .ok_or_else(|| DispatchError::Qp("Hessian is not positive definite".into()))?;
        return Ok(QpSolution {
            x: chol.solve(&(-&qp.c)),
            z: DVector::zeros(0),
            iterations: 0,
            converged: true,
        });
    }
    // least-squares start, shifted into the interior
    let mut m0 = qp.g.tr_mul(&qp.g) + &qp.h;
    let mut x = factor(&mut m0)?.solve(&(qp.g.tr_mul(&qp.b) - &qp.c));
    let mut s = &qp.b - &qp.g * &x;
    let mut z = -s.clone();
    let shift = |v: &mut DVector<f64>| {
        let lo = v.min();
        if lo < 1.0 {
            v.add_scalar_mut(1.0 - lo);
        }
    };
    shift(&mut s);
    shift(&mut z);

    let tol = qp.tolerance;
    let scale_d = 1.0 + qp.c.amax();
    let scale_p = 1.0 + qp.b.amax();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it;
        let r_d = &qp.h * &x + &qp.c + qp.g.tr_mul(&z);
        let r_p = &qp.g * &x + &s - &qp.b;
        let mu = s.dot(&z) / p as f64;
        if r_d.amax() <= tol * scale_d && r_p.amax() <= tol * scale_p && mu <= tol * scale_d {
            converged = true;
            break;
        }
        iterations = it + 1;
        let w = z.component_div(&s);
        let mut gw = qp.g.clone();
        for (r, mut row) in gw.row_iter_mut().enumerate() {
            row *= w[r].sqrt();
        }
        let mut m = gw.tr_mul(&gw) + &qp.h;
        let chol = factor(&mut m)?;
        let direction = |r_c: &DVector<f64>| {
            let t = (z.component_mul(&r_p) - r_c).component_div(&s);
            let rhs = -&r_d - qp.g.tr_mul(&t);
            let dx = chol.solve(&rhs);
            let ds = -&r_p - &qp.g * &dx;
            let dz = (-r_c - z.component_mul(&ds)).component_div(&s);
            (dx, ds, dz)
        };
        let r_c = s.component_mul(&z);
        let (_, ds_a, dz_a) = direction(&r_c);
        let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
        let mu_aff = (&s + a_aff * &ds_a).dot(&(&z + a_aff * &dz_a)) / p as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let r_c = r_c + ds_a.component_mul(&dz_a) - DVector::from_element(p, sigma * mu);
        let (dx, ds, dz) = direction(&r_c);
        let eta = (1.0 - mu).clamp(0.9, 0.995);
        let alpha_p = (eta * max_step(&s, &ds)).min(1.0);
        let alpha_d = (eta * max_step(&z, &dz)).min(1.0);
        let alpha = alpha_p.min(alpha_d);
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
        if !(x.iter().all(|v| v.is_finite())) {
            return Err(DispatchError::Qp("iterates diverged".into()));
        }
    }
    Ok(QpSolution {
        x,
        z,
        iterations,
        converged,
    })
}

/// Cholesky factor of `m`, adding a growing diagonal shift when needed.
fn factor(m: &mut DMatrix<f64>) -> Result<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>, DispatchError> {
    let n = m.nrows();
    let mut reg = 0.0;
    loop {
        if let Some(ch) = m.clone().cholesky() {
            return Ok(ch);
        }
        let next = if reg == 0.0 { 1e-12 * (1.0 + m.diagonal().amax()) } else { reg * 100.0 };
        if next > 1e-2 * (1.0 + m.diagonal().amax()) {
            return Err(DispatchError::Qp("normal equations are singular".into()));
        }
        for i in 0..n {
            m[(i, i)] += next - reg;
        }
        reg = next;
    }
}
