use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryModel, BatteryParams, BatteryState};
use crate::dispatch::{CostParams, Converters, HorizonConfig, OperatingLimits, SqpOptions};
use crate::scheduler::{EstimatorNoise, LoopConfig};

use super::HarnessError;

/// Ensemble and forecast-error learning settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Ensemble size `m`.
    pub members: usize,
    /// Days of error history `H`.
    pub history_days: usize,
    /// Daily segments `S`.
    pub segments: usize,
    pub forecaster: String,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: 10,
            history_days: 2,
            segments: 12,
            forecaster: "persistence".into(),
            seed: 42,
        }
    }
}

/// Where the disturbance data comes from. Without any path the synthetic
/// generator is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Aligned table as written by `synth` (timestamp plus four series).
    pub table: Option<PathBuf>,
    pub pv: Option<PathBuf>,
    pub load: Option<PathBuf>,
    pub price: Option<PathBuf>,
    pub t_amb: Option<PathBuf>,
    /// Factor applied to ingested prices.
    pub price_scale: f64,
    /// Seed of the synthetic generator.
    pub synth_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            table: None,
            pv: None,
            load: None,
            price: None,
            t_amb: None,
            price_scale: 5.0,
            synth_seed: 7,
        }
    }
}

/// Span and initial condition of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Simulated days after the warm-up.
    pub days: f64,
    pub initial_soc: f64,
    pub initial_temperature: f64,
    pub solver: String,
    pub noise: EstimatorNoise,
    /// Plant multiplier on the equivalent series resistance.
    pub plant_resistance_scale: f64,
    /// Plant multiplier on the side-reaction exchange current.
    pub plant_side_reaction_scale: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            days: 7.0,
            initial_soc: 0.5,
            initial_temperature: 298.15,
            solver: "sqp".into(),
            noise: EstimatorNoise::default(),
            plant_resistance_scale: 1.0,
            plant_side_reaction_scale: 1.0,
        }
    }
}

/// Complete description of an experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: HorizonConfig,
    pub limits: OperatingLimits,
    pub cost: CostParams,
    pub converters: Converters,
    pub battery: BatteryParams,
    pub ensemble: EnsembleConfig,
    pub data: DataConfig,
    pub simulation: SimulationConfig,
    pub solver: SqpOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon: HorizonConfig::default(),
            limits: OperatingLimits::default(),
            cost: CostParams::default(),
            converters: Converters::default(),
            battery: BatteryParams::default_table1(),
            ensemble: EnsembleConfig::default(),
            data: DataConfig::default(),
            simulation: SimulationConfig::default(),
            solver: SqpOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |e: &dyn std::fmt::Display| HarnessError::Config(e.to_string());
        self.horizon.validate().map_err(|e| cfg(&e))?;
        self.limits.validate().map_err(|e| cfg(&e))?;
        self.cost.validate().map_err(|e| cfg(&e))?;
        self.battery.validate().map_err(|e| cfg(&e))?;
        let e = &self.ensemble;
        if e.members == 0 {
            return Err(HarnessError::Config("ensemble.members must be at least 1".into()));
        }
        if e.history_days == 0 {
            return Err(HarnessError::Config("ensemble.history_days must be at least 1".into()));
        }
        if e.segments == 0 || self.horizon.steps_per_day() % e.segments != 0 {
            return Err(HarnessError::Config(format!(
                "ensemble.segments = {} must divide the {} steps of a day",
                e.segments,
                self.horizon.steps_per_day()
            )));
        }
        let s = &self.simulation;
        if !(s.days > 0.0) || !(0.0..=1.0).contains(&s.initial_soc) {
            return Err(HarnessError::Config(
                "simulation.days must be positive and initial_soc within [0, 1]".into(),
            ));
        }
        if !(s.plant_resistance_scale > 0.0 && s.plant_side_reaction_scale > 0.0) {
            return Err(HarnessError::Config("plant scales must be positive".into()));
        }
        if !(self.data.price_scale > 0.0) {
            return Err(HarnessError::Config("data.price_scale must be positive".into()));
        }
        Ok(())
    }

    /// Steps from the start of the data to the first simulated step:
    /// the error-history window plus one day for the persistence forecast.
    pub fn warmup_steps(&self) -> usize {
        (self.ensemble.history_days + 1) * self.horizon.steps_per_day()
    }

    /// Simulated steps, rounded up to whole modification periods.
    pub fn simulated_steps(&self) -> usize {
        let n = (self.simulation.days * self.horizon.steps_per_day() as f64).round() as usize;
        let m = self.horizon.n_m();
        n.div_ceil(m) * m
    }

    /// Days of data a run needs, including warm-up and the last horizon.
    pub fn required_days(&self) -> usize {
        let day = self.horizon.steps_per_day();
        (self.warmup_steps() + self.simulated_steps() + self.horizon.n_p()).div_ceil(day)
    }

    pub fn initial_state(&self) -> crate::Result<BatteryState> {
        let model = BatteryModel::new(self.battery.clone())?;
        Ok(model.fresh_state(self.simulation.initial_soc, self.simulation.initial_temperature))
    }

    pub fn loop_config(&self) -> LoopConfig {
        let mut plant = self.battery.clone();
        plant.resistance_scale *= self.simulation.plant_resistance_scale;
        plant.side_reaction_scale *= self.simulation.plant_side_reaction_scale;
        LoopConfig {
            horizon: self.horizon,
            limits: self.limits,
            cost: self.cost,
            converters: self.converters,
            battery: self.battery.clone(),
            plant,
            members: self.ensemble.members,
            history_days: self.ensemble.history_days,
            segments: self.ensemble.segments,
            forecaster: self.ensemble.forecaster.clone(),
            solver: self.simulation.solver.clone(),
            solver_options: self.solver,
            noise: self.simulation.noise,
            start: self.warmup_steps(),
            steps: self.simulated_steps(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "[ensemble]\nmembers = 3\n[simulation]\ndays = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.ensemble.members, 3);
        assert_eq!(cfg.ensemble.segments, 12);
        assert_eq!(cfg.limits.p_grid_max, 10.0);
        assert_eq!(cfg.data.price_scale, 5.0);
        assert_eq!(cfg.simulated_steps(), 192);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("[ensemble]\nmembrs = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[ensemble]\nsegments = 7\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[horizon]\ndispatch_interval = 0.75\n").is_err());
    }
}
