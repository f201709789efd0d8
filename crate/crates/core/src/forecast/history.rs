use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{learn_moments, DisturbanceTable, ForecastError, MomentSet};

/// Forecast error `forecast - actual` observed at `time` [h since the
/// midnight that starts the data].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub time: f64,
    pub error: [f64; 4],
}

/// Forecast errors of the last `window_days` days.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHistory {
    window_days: usize,
    records: VecDeque<ErrorRecord>,
}

impl ErrorHistory {
    pub fn new(window_days: usize) -> Self {
        Self {
            window_days,
            records: VecDeque::new(),
        }
    }

    /// Errors of every row of a table with forecast columns, keeping only
    /// the trailing window.
    pub fn from_table(table: &DisturbanceTable, window_days: usize) -> Result<Self, ForecastError> {
        let forecast = table.forecast.as_ref().ok_or(ForecastError::MissingForecast)?;
        let mut h = Self::new(window_days);
        for (i, (a, f)) in table.actual.iter().zip(forecast).enumerate() {
            h.push(table.hours_at(i), f.to_array(), a.to_array());
        }
        Ok(h)
    }

    pub fn from_csv_file(path: &Path, window_days: usize) -> Result<Self, ForecastError> {
        Self::from_table(&DisturbanceTable::read_csv_file(path)?, window_days)
    }

    /// Records the error of one step and drops anything older than the window.
    pub fn push(&mut self, time: f64, forecast: [f64; 4], actual: [f64; 4]) {
        let mut error = [0.0; 4];
        for k in 0..4 {
            error[k] = forecast[k] - actual[k];
        }
        self.push_error(ErrorRecord { time, error });
    }

    pub fn push_error(&mut self, record: ErrorRecord) {
        self.records.push_back(record);
        let cutoff = record.time - 24.0 * self.window_days as f64;
        while self.records.front().is_some_and(|r| r.time <= cutoff) {
            self.records.pop_front();
        }
    }

    pub fn window_days(&self) -> usize {
        self.window_days
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> Vec<ErrorRecord> {
        self.records.iter().copied().collect()
    }

    /// Moments of every segment, `None` where the history is too thin.
    /// Index `s - 1` holds segment `s`.
    pub fn segment_moments(&self, segments: usize) -> Vec<Option<MomentSet>> {
        let records = self.records();
        (1..=segments)
            .map(|s| learn_moments(&records, s, segments, self.window_days).ok())
            .collect()
    }
}
