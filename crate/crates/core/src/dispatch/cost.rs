use serde::{Deserialize, Serialize};

use super::DispatchError;

/// Economic constants: battery replacement value and slack penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Cells in the pack.
    pub cells: f64,
    /// Price of one cell [$].
    pub cell_price: f64,
    /// Remaining-capacity fraction at end of life.
    pub end_of_life: f64,
    /// Pristine cell capacity [Ah].
    pub capacity: f64,
    /// Weight on `(eps1, eps3)`, the lower SoC and temperature slacks.
    pub w1: [[f64; 2]; 2],
    /// Weight on `(eps2, eps4)`, the upper SoC and temperature slacks.
    pub w2: [[f64; 2]; 2],
    /// Linear penalty per unit of slack. Makes the penalty exact, so
    /// slacks vanish whenever a slack-free solution exists.
    pub slack_linear: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            cells: 4000.0,
            cell_price: 1.0,
            end_of_life: 0.6,
            capacity: 1.747,
            w1: [[1e4, 0.0], [0.0, 1e4]],
            w2: [[1e4, 0.0], [0.0, 1e4]],
            slack_linear: 1e3,
        }
    }
}

/// Split of the running cost [$/h].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningCost {
    pub trade: f64,
    pub battery: f64,
}

impl RunningCost {
    pub fn total(&self) -> f64 {
        self.trade + self.battery
    }
}

impl CostParams {
    /// Degradation price of lost charge [$/Ah].
    pub fn kappa(&self) -> f64 {
        self.cells * self.cell_price / ((1.0 - self.end_of_life) * self.capacity)
    }

    /// Quadratic plus linear slack penalty.
    pub fn slack_penalty(&self, eps: &[f64; 4]) -> f64 {
        let quad = |w: &[[f64; 2]; 2], a: f64, b: f64| {
            a * (w[0][0] * a + w[0][1] * b) + b * (w[1][0] * a + w[1][1] * b)
        };
        quad(&self.w1, eps[0], eps[2])
            + quad(&self.w2, eps[1], eps[3])
            + self.slack_linear * eps.iter().sum::<f64>()
    }

    /// Gradient of [`Self::slack_penalty`].
    pub fn slack_gradient(&self, eps: &[f64; 4]) -> [f64; 4] {
        let h = self.slack_hessian();
        let mut g = [self.slack_linear; 4];
        for (r, gr) in g.iter_mut().enumerate() {
            for c in 0..4 {
                *gr += h[r][c] * eps[c];
            }
        }
        g
    }

    /// Constant Hessian of the slack penalty, in `eps1..eps4` order.
    pub fn slack_hessian(&self) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        for (w, (a, b)) in [(&self.w1, (0, 2)), (&self.w2, (1, 3))] {
            let idx = [a, b];
            for r in 0..2 {
                for c in 0..2 {
                    h[idx[r]][idx[c]] = w[r][c] + w[c][r];
                }
            }
        }
        h
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        if !(self.kappa() > 0.0 && self.kappa().is_finite()) {
            return Err(DispatchError::Config(
                "cells, cell_price and capacity must be positive and end_of_life below 1".into(),
            ));
        }
        for (name, w) in [("w1", &self.w1), ("w2", &self.w2)] {
            let sym = w[0][1] == w[1][0];
            let pd = w[0][0] > 0.0 && w[0][0] * w[1][1] - w[0][1] * w[1][0] > 0.0;
            if !(sym && pd) {
                return Err(DispatchError::Config(format!(
                    "{name} must be symmetric positive definite"
                )));
            }
        }
        if !(self.slack_linear >= 0.0) {
            return Err(DispatchError::Config("slack_linear must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cost of trading and of capacity fade per unit time [$/h]. Positive
/// `p_grid` exports; `i_sr` is the (non-positive) side-reaction current.
pub fn running_cost(i_sr: f64, p_grid: f64, price: f64, cost: &CostParams) -> RunningCost {
    RunningCost {
        trade: -price * p_grid,
        battery: cost.kappa() * -i_sr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_cost_examples() {
        let c = CostParams::default();
        assert_eq!(running_cost(0.0, 0.0, 0.4, &c).total(), 0.0);
        assert!((running_cost(0.0, 5.0, 0.1, &c).total() + 0.5).abs() < 1e-15);
        assert!((c.kappa() - 5724.1).abs() < 0.05);
        assert!(running_cost(-1e-5, 0.0, 0.0, &c).battery > 0.0);
    }

    #[test]
    fn slack_penalty_pairs_and_gradient() {
        let mut c = CostParams::default();
        c.w1 = [[2.0, 0.5], [0.5, 3.0]];
        c.w2 = [[1.0, 0.0], [0.0, 4.0]];
        c.slack_linear = 7.0;
        let e = [0.1, 0.2, 0.3, 0.4];
        let expected = 2.0 * 0.01 + 2.0 * 0.5 * 0.03 + 3.0 * 0.09 + 0.04 + 4.0 * 0.16 + 7.0;
        assert!((c.slack_penalty(&e) - expected).abs() < 1e-12);
        let g = c.slack_gradient(&e);
        for k in 0..4 {
            let mut p = e;
            p[k] += 1e-7;
            let fd = (c.slack_penalty(&p) - c.slack_penalty(&e)) / 1e-7;
            assert!((fd - g[k]).abs() < 1e-5);
        }
        assert!(c.validate().is_ok());
        c.w1 = [[1.0, 2.0], [2.0, 1.0]];
        assert!(c.validate().is_err());
    }
}
