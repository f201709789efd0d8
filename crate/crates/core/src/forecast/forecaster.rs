//! Day-ahead forecasters, selectable by name.

use crate::registry::Registry;

use super::{DisturbanceSample, DisturbanceTable, ForecastError};

/// Produces the forecast of a table row as known at an earlier row.
pub trait Forecaster: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Forecast of step `target` issued at step `issued_at`; only rows
    /// before `issued_at` count as measured.
    fn forecast(
        &self,
        table: &DisturbanceTable,
        issued_at: usize,
        target: usize,
    ) -> Result<DisturbanceSample, ForecastError>;

    /// Forecasts of `len` consecutive steps starting at `start`.
    fn trajectory(
        &self,
        table: &DisturbanceTable,
        issued_at: usize,
        start: usize,
        len: usize,
    ) -> Result<Vec<DisturbanceSample>, ForecastError> {
        (start..start + len)
            .map(|t| self.forecast(table, issued_at, t))
            .collect()
    }

    /// Steps of data needed before the first forecast.
    fn lookback(&self, steps_per_day: usize) -> usize;
}

/// Same time yesterday: `measured[len - n_day + (j mod n_day)]` for the
/// `j`-th step after the end of `history`.
pub fn persistence_forecast(
    history: &[DisturbanceSample],
    steps_per_day: usize,
    horizon: usize,
) -> Result<Vec<DisturbanceSample>, ForecastError> {
    let n = history.len();
    if steps_per_day == 0 || n < steps_per_day {
        return Err(ForecastError::InsufficientHistory {
            needed: steps_per_day,
            available: n,
        });
    }
    Ok((0..horizon)
        .map(|j| history[n - steps_per_day + j % steps_per_day])
        .collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PersistenceForecaster;

impl Forecaster for PersistenceForecaster {
    fn name(&self) -> &'static str {
        "persistence"
    }

    fn forecast(
        &self,
        table: &DisturbanceTable,
        issued_at: usize,
        target: usize,
    ) -> Result<DisturbanceSample, ForecastError> {
        let day = table.steps_per_day();
        check_range(table, target)?;
        let days_back = if target >= issued_at {
            (target - issued_at) / day + 1
        } else {
            1
        };
        let source = target
            .checked_sub(days_back * day)
            .ok_or(ForecastError::InsufficientHistory {
                needed: days_back * day,
                available: target,
            })?;
        Ok(table.actual[source])
    }

    fn lookback(&self, steps_per_day: usize) -> usize {
        steps_per_day
    }
}

/// Oracle forecaster that returns the realized values.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectForecaster;

impl Forecaster for PerfectForecaster {
    fn name(&self) -> &'static str {
        "perfect"
    }

    fn forecast(
        &self,
        table: &DisturbanceTable,
        _issued_at: usize,
        target: usize,
    ) -> Result<DisturbanceSample, ForecastError> {
        check_range(table, target)?;
        Ok(table.actual[target])
    }

    fn lookback(&self, _steps_per_day: usize) -> usize {
        0
    }
}

/// Reads the forecast columns shipped with the data.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExternalForecaster;

impl Forecaster for ExternalForecaster {
    fn name(&self) -> &'static str {
        "external"
    }

    fn forecast(
        &self,
        table: &DisturbanceTable,
        _issued_at: usize,
        target: usize,
    ) -> Result<DisturbanceSample, ForecastError> {
        check_range(table, target)?;
        let f = table.forecast.as_ref().ok_or(ForecastError::MissingForecast)?;
        Ok(f[target])
    }

    fn lookback(&self, _steps_per_day: usize) -> usize {
        0
    }
}

fn check_range(table: &DisturbanceTable, index: usize) -> Result<(), ForecastError> {
    if index < table.len() {
        Ok(())
    } else {
        Err(ForecastError::OutOfRange {
            index,
            len: table.len(),
        })
    }
}

pub fn forecaster_registry() -> Registry<dyn Forecaster> {
    Registry::new("forecaster")
        .with("persistence", "value measured 24 h earlier", |_| -> Box<dyn Forecaster> {
            Box::new(PersistenceForecaster)
        })
        .with("perfect", "realized values (oracle)", |_| -> Box<dyn Forecaster> { Box::new(PerfectForecaster) })
        .with("external", "forecast columns of the input data", |_| -> Box<dyn Forecaster> {
            Box::new(ExternalForecaster)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::TIMESTAMP_FORMAT;

    fn ramp(n: usize) -> Vec<DisturbanceSample> {
        (0..n)
            .map(|i| DisturbanceSample::new(i as f64, 1.0, 0.1, 290.0))
            .collect()
    }

    #[test]
    fn constant_and_periodic_histories() {
        let c = vec![DisturbanceSample::new(1.5, 2.0, 0.3, 291.0); 30];
        assert!(persistence_forecast(&c, 24, 40).unwrap().iter().all(|d| *d == c[0]));
        let periodic: Vec<_> = (0..72)
            .map(|i| DisturbanceSample::new((i % 24) as f64, 0.0, 0.0, 290.0))
            .collect();
        let f = persistence_forecast(&periodic[..48], 24, 24).unwrap();
        assert_eq!(f, periodic[48..72].to_vec());
    }

    #[test]
    fn ramp_error_is_minus_one_day() {
        let h = ramp(96);
        let f = persistence_forecast(&h[..48], 24, 48).unwrap();
        for (j, d) in f.iter().enumerate() {
            assert_eq!(d.p_pv - h[48 + j].p_pv, if j < 24 { -24.0 } else { -48.0 });
        }
        assert!(persistence_forecast(&h[..10], 24, 1).is_err());
    }

    #[test]
    fn table_forecasters_agree_with_free_function() {
        let start =
            chrono::NaiveDateTime::parse_from_str("2024-01-01 00:00:00", TIMESTAMP_FORMAT).unwrap();
        let table = DisturbanceTable::new(start, 1.0, ramp(72));
        let reg = forecaster_registry();
        let p = reg.build("persistence", &()).unwrap();
        let traj = p.trajectory(&table, 30, 30, 20).unwrap();
        assert_eq!(traj, persistence_forecast(&table.actual[..30], 24, 20).unwrap());
        assert!(p.forecast(&table, 10, 10).is_err());
        let perfect = reg.build("perfect", &()).unwrap();
        assert_eq!(perfect.forecast(&table, 0, 5).unwrap(), table.actual[5]);
        let ext = reg.build("external", &()).unwrap();
        assert!(matches!(ext.forecast(&table, 0, 5), Err(ForecastError::MissingForecast)));
        assert!(reg.build("ann", &()).is_err());
    }
}
