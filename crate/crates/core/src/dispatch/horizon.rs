use serde::{Deserialize, Serialize};

use super::DispatchError;

/// Market calendar in hours: sampling step, dispatch interval and the
/// delay, optimization and modification horizons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonConfig {
    pub dt: f64,
    pub dispatch_interval: f64,
    pub delay: f64,
    pub optimization: f64,
    pub modification: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            dt: 0.25,
            dispatch_interval: 1.0,
            delay: 2.0,
            optimization: 12.0,
            modification: 1.0,
        }
    }
}

impl HorizonConfig {
    /// Number of sampling steps in `hours`; errors unless it is an integer.
    pub fn steps(&self, hours: f64) -> Result<usize, DispatchError> {
        let n = hours / self.dt;
        if !(n >= 0.0) || (n - n.round()).abs() > 1e-9 {
            return Err(DispatchError::Config(format!(
                "{hours} h is not a whole number of {} h steps",
                self.dt
            )));
        }
        Ok(n.round() as usize)
    }

    fn count(&self, hours: f64) -> usize {
        (hours / self.dt).round() as usize
    }

    pub fn n_di(&self) -> usize {
        self.count(self.dispatch_interval)
    }

    pub fn n_d(&self) -> usize {
        self.count(self.delay)
    }

    pub fn n_t(&self) -> usize {
        self.count(self.optimization)
    }

    pub fn n_m(&self) -> usize {
        self.count(self.modification)
    }

    pub fn n_p(&self) -> usize {
        self.n_d() + self.n_t()
    }

    /// Dispatch intervals in the optimization horizon.
    pub fn blocks(&self) -> usize {
        self.n_t() / self.n_di().max(1)
    }

    pub fn steps_per_day(&self) -> usize {
        self.count(24.0)
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DispatchError::Config(format!("dt = {} must be positive", self.dt)));
        }
        let n_di = self.steps(self.dispatch_interval)?;
        let n_d = self.steps(self.delay)?;
        let n_t = self.steps(self.optimization)?;
        let n_m = self.steps(self.modification)?;
        self.steps(24.0)?;
        let bad = |msg: String| Err(DispatchError::Config(msg));
        if n_di == 0 || n_t == 0 || n_m == 0 {
            return bad("dispatch interval, optimization and modification horizons must be positive".into());
        }
        if n_d % n_di != 0 || n_t % n_di != 0 || n_m % n_di != 0 {
            return bad(format!(
                "the dispatch interval ({} h) must divide D, T and M",
                self.dispatch_interval
            ));
        }
        if n_m > n_d {
            return bad(format!(
                "modification horizon {} h exceeds delay {} h",
                self.modification, self.delay
            ));
        }
        if n_m > n_t {
            return bad("modification horizon exceeds optimization horizon".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let h = HorizonConfig::default();
        h.validate().unwrap();
        assert_eq!((h.n_di(), h.n_d(), h.n_t(), h.n_m(), h.n_p()), (4, 8, 48, 4, 56));
        assert_eq!(h.blocks(), 12);
        assert_eq!(h.steps_per_day(), 96);
    }

    #[test]
    fn rejects_misaligned_horizons() {
        let h = HorizonConfig {
            optimization: 12.1,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        let h = HorizonConfig {
            modification: 3.0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        let h = HorizonConfig {
            dispatch_interval: 0.75,
            ..Default::default()
        };
        assert!(h.validate().is_err());
    }
}
