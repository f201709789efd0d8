use serde::{Deserialize, Serialize};

use super::DispatchError;

/// Operating limits of the pack and the point of connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingLimits {
    pub soc_min: f64,
    pub soc_max: f64,
    /// Cell voltage [V].
    pub v_min: f64,
    pub v_max: f64,
    /// Cell current magnitude [A].
    pub i_max: f64,
    /// Pack power magnitude [kW].
    pub p_b_max: f64,
    /// Grid exchange magnitude [kW].
    pub p_grid_max: f64,
    /// Pack temperature [K].
    pub t_min: f64,
    pub t_max: f64,
    /// Electric power of the thermal unit [kW].
    pub p_c_max: f64,
}

impl Default for OperatingLimits {
    fn default() -> Self {
        Self {
            soc_min: 0.01,
            soc_max: 0.99,
            v_min: 3.2,
            v_max: 4.2,
            i_max: 0.873,
            p_b_max: 12.0,
            p_grid_max: 10.0,
            t_min: 296.15,
            t_max: 300.15,
            p_c_max: 0.1,
        }
    }
}

impl OperatingLimits {
    /// Bound on the thermal power `|Q_c|` for a unit with the given
    /// coefficient of performance.
    pub fn q_c_max(&self, cop: f64) -> f64 {
        cop * self.p_c_max
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let finite = [
            self.soc_min,
            self.soc_max,
            self.v_min,
            self.v_max,
            self.i_max,
            self.p_b_max,
            self.p_grid_max,
            self.t_min,
            self.t_max,
            self.p_c_max,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(DispatchError::Config("limits must be finite".into()));
        }
        let pairs = [
            ("soc", self.soc_min, self.soc_max),
            ("v", self.v_min, self.v_max),
            ("t", self.t_min, self.t_max),
        ];
        for (name, lo, hi) in pairs {
            if lo >= hi {
                return Err(DispatchError::Config(format!("{name}_min must be below {name}_max")));
            }
        }
        if self.i_max <= 0.0 || self.p_b_max <= 0.0 || self.p_grid_max <= 0.0 || self.p_c_max < 0.0 {
            return Err(DispatchError::Config(
                "i_max, p_b_max and p_grid_max must be positive, p_c_max non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let l = OperatingLimits::default();
        l.validate().unwrap();
        assert!((l.q_c_max(7.0) - 0.7).abs() < 1e-15);
        let bad = OperatingLimits {
            v_min: 4.3,
            ..l
        };
        assert!(bad.validate().is_err());
    }
}
