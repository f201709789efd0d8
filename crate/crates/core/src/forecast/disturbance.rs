use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::ForecastError;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Exogenous inputs at one time step. Forecasts and measurements share it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceSample {
    /// PV output [kW].
    pub p_pv: f64,
    /// Household load [kW].
    pub p_load: f64,
    /// Real-time electricity price [$/kWh]; may be negative.
    pub price: f64,
    /// Ambient temperature [K].
    pub t_amb: f64,
}

impl DisturbanceSample {
    pub fn new(p_pv: f64, p_load: f64, price: f64, t_amb: f64) -> Self {
        Self {
            p_pv,
            p_load,
            price,
            t_amb,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p_pv, self.p_load, self.price, self.t_amb]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_physical(&self) -> bool {
        self.p_pv >= 0.0 && self.p_load >= 0.0 && self.t_amb > 0.0 && self.price.is_finite()
    }
}

/// Evenly sampled measurements, optionally with a forecast per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceTable {
    pub start: NaiveDateTime,
    /// Step length [h].
    pub dt: f64,
    pub actual: Vec<DisturbanceSample>,
    pub forecast: Option<Vec<DisturbanceSample>>,
}

const FORECAST_COLUMNS: [&str; 4] = [
    "p_pv_forecast",
    "p_load_forecast",
    "price_forecast",
    "t_amb_forecast",
];

impl DisturbanceTable {
    pub fn new(start: NaiveDateTime, dt: f64, actual: Vec<DisturbanceSample>) -> Self {
        Self {
            start,
            dt,
            actual,
            forecast: None,
        }
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn steps_per_day(&self) -> usize {
        (24.0 / self.dt).round() as usize
    }

    /// Hours elapsed since midnight of the first day, at step `index`.
    pub fn hours_at(&self, index: usize) -> f64 {
        let t = self.start.time();
        let offset = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
        offset + index as f64 * self.dt
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        let secs = (index as f64 * self.dt * 3600.0).round() as i64;
        self.start + chrono::Duration::seconds(secs)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp", "p_pv", "p_load", "price", "t_amb"];
        if self.forecast.is_some() {
            header.extend(FORECAST_COLUMNS);
        }
        w.write_record(&header)?;
        for (i, a) in self.actual.iter().enumerate() {
            let mut row = vec![self.timestamp(i).format(TIMESTAMP_FORMAT).to_string()];
            row.extend(a.to_array().iter().map(|v| format!("{v}")));
            if let Some(f) = &self.forecast {
                row.extend(f[i].to_array().iter().map(|v| format!("{v}")));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), ForecastError> {
        let file = std::fs::File::create(path).map_err(|e| csv_err(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| csv_err(path, e))
    }

    pub fn read_csv_file(path: &Path) -> Result<Self, ForecastError> {
        let file = std::fs::File::open(path).map_err(|e| csv_err(path, e))?;
        Self::read_csv(file).map_err(|e| match e {
            ForecastError::Csv { message, .. } => csv_err(path, message),
            other => other,
        })
    }

    /// Reads the table format written by [`Self::write_csv`]. Rows must be
    /// evenly spaced.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ForecastError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(|e| csv_err("<table>", e))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let base: Vec<usize> = ["timestamp", "p_pv", "p_load", "price", "t_amb"]
            .iter()
            .map(|n| col(n).ok_or_else(|| csv_err("<table>", format!("missing column `{n}`"))))
            .collect::<Result<_, _>>()?;
        let fc: Option<Vec<usize>> = FORECAST_COLUMNS.iter().map(|n| col(n)).collect();
        let mut times = Vec::new();
        let mut actual = Vec::new();
        let mut forecast = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err("<table>", e))?;
            let row = line + 2;
            let ts = NaiveDateTime::parse_from_str(rec[base[0]].trim(), TIMESTAMP_FORMAT)
                .map_err(|e| csv_err("<table>", format!("row {row}: timestamp: {e}")))?;
            let num = |idx: usize| -> Result<f64, ForecastError> {
                rec[idx]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| csv_err("<table>", format!("row {row}: `{}`: {e}", &rec[idx])))
            };
            times.push(ts);
            actual.push(DisturbanceSample::new(
                num(base[1])?,
                num(base[2])?,
                num(base[3])?,
                num(base[4])?,
            ));
            if let Some(fc) = &fc {
                forecast.push(DisturbanceSample::new(
                    num(fc[0])?,
                    num(fc[1])?,
                    num(fc[2])?,
                    num(fc[3])?,
                ));
            }
        }
        if times.len() < 2 {
            return Err(csv_err("<table>", "need at least two rows"));
        }
        let step = (times[1] - times[0]).num_seconds();
        if step <= 0 {
            return Err(csv_err("<table>", "timestamps must increase"));
        }
        if let Some(bad) = times
            .windows(2)
            .position(|w| (w[1] - w[0]).num_seconds() != step)
        {
            return Err(csv_err(
                "<table>",
                format!("uneven spacing after row {}", bad + 2),
            ));
        }
        Ok(Self {
            start: times[0],
            dt: step as f64 / 3600.0,
            actual,
            forecast: fc.map(|_| forecast),
        })
    }
}

fn csv_err(path: impl AsRef<Path>, e: impl std::fmt::Display) -> ForecastError {
    ForecastError::Csv {
        path: path.as_ref().display().to_string(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DisturbanceTable {
        let start = NaiveDateTime::parse_from_str("2024-01-01 00:00:00", TIMESTAMP_FORMAT).unwrap();
        let actual = (0..8)
            .map(|i| DisturbanceSample::new(i as f64 * 0.5, 1.0 + 0.1 * i as f64, 0.1, 290.0))
            .collect();
        DisturbanceTable::new(start, 0.25, actual)
    }

    #[test]
    fn csv_round_trip_with_forecast() {
        let mut t = table();
        t.forecast = Some(t.actual.iter().map(|s| DisturbanceSample { price: s.price * 2.0, ..*s }).collect());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = DisturbanceTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn hours_follow_start_time() {
        let mut t = table();
        t.start = NaiveDateTime::parse_from_str("2024-01-01 06:30:00", TIMESTAMP_FORMAT).unwrap();
        assert_eq!(t.hours_at(0), 6.5);
        assert_eq!(t.hours_at(4), 7.5);
        assert_eq!(t.steps_per_day(), 96);
    }

    #[test]
    fn rejects_uneven_rows() {
        let text = "timestamp,p_pv,p_load,price,t_amb\n2024-01-01 00:00:00,0,1,0.1,290\n2024-01-01 00:15:00,0,1,0.1,290\n2024-01-01 00:45:00,0,1,0.1,290\n";
        assert!(DisturbanceTable::read_csv(text.as_bytes()).is_err());
    }
}
