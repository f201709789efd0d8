use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, TimeDelta};

use crate::forecast::{DisturbanceSample, DisturbanceTable};

use super::HarnessError;

/// Longest tolerated distance between two samples of one series [h].
pub const MAX_GAP_HOURS: f64 = 2.0;

const FORMATS: [&str; 4] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
];

/// A single measured series, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub times: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampling {
    /// Hold each value until the next sample.
    ZeroOrderHold,
    Linear,
}

/// One `(timestamp, value)` file per disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPaths {
    pub pv: PathBuf,
    pub load: PathBuf,
    pub price: PathBuf,
    pub t_amb: PathBuf,
}

fn parse_time(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
}

impl TimeSeries {
    /// Reads a two-column CSV with a header row.
    pub fn read_csv_file(path: &Path, name: &str) -> Result<Self, HarnessError> {
        let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read_csv(file, path, name)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, path: &Path, name: &str) -> Result<Self, HarnessError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let err = |message: String| HarnessError::Parse {
                path: path.to_path_buf(),
                row,
                message,
            };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() < 2 {
                return Err(err(format!("expected 2 columns, found {}", rec.len())));
            }
            let t = parse_time(&rec[0]).ok_or_else(|| err(format!("bad timestamp `{}`", &rec[0])))?;
            let v: f64 = rec[1]
                .parse()
                .map_err(|_| err(format!("bad value `{}`", &rec[1])))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value `{}`", &rec[1])));
            }
            if times.last().is_some_and(|&last| t <= last) {
                return Err(err("timestamps must increase".into()));
            }
            times.push(t);
            values.push(v);
        }
        if times.is_empty() {
            return Err(HarnessError::Parse {
                path: path.to_path_buf(),
                row: 1,
                message: "no data rows".into(),
            });
        }
        Ok(Self {
            name: name.to_string(),
            times,
            values,
        })
    }

    fn check_gaps(&self) -> Result<(), HarnessError> {
        for w in self.times.windows(2) {
            let hours = (w[1] - w[0]).num_seconds() as f64 / 3600.0;
            if hours > MAX_GAP_HOURS {
                return Err(HarnessError::Gap {
                    series: self.name.clone(),
                    after: w[0].to_string(),
                    hours,
                });
            }
        }
        Ok(())
    }

    /// Value at `t`, which must lie within the series.
    fn value_at(&self, t: NaiveDateTime, mode: Resampling) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        // i >= 1 since t >= times[0]
        let lo = i - 1;
        if self.times[lo] == t || lo + 1 == self.times.len() {
            return self.values[lo];
        }
        match mode {
            Resampling::ZeroOrderHold => self.values[lo],
            Resampling::Linear => {
                let span = (self.times[lo + 1] - self.times[lo]).num_milliseconds() as f64;
                let w = (t - self.times[lo]).num_milliseconds() as f64 / span;
                self.values[lo] + w * (self.values[lo + 1] - self.values[lo])
            }
        }
    }
}

/// Samples `series` on the grid `start + i·dt`, `i < len`.
pub fn resample(series: &TimeSeries, start: NaiveDateTime, dt: f64, len: usize, mode: Resampling) -> Vec<f64> {
    let step = TimeDelta::milliseconds((dt * 3.6e6).round() as i64);
    (0..len)
        .map(|i| series.value_at(start + step * i as i32, mode))
        .collect()
}

/// Reads the four series, checks for gaps and resamples them onto a common
/// `dt`-hour grid over their overlap. Price is held between samples and
/// multiplied by `price_scale`; the other series are interpolated linearly.
pub fn load_timeseries(paths: &SeriesPaths, dt: f64, price_scale: f64) -> Result<DisturbanceTable, HarnessError> {
    if !(dt > 0.0) {
        return Err(HarnessError::Config(format!("time step must be positive, got {dt}")));
    }
    let series = [
        TimeSeries::read_csv_file(&paths.pv, "pv")?,
        TimeSeries::read_csv_file(&paths.load, "load")?,
        TimeSeries::read_csv_file(&paths.price, "price")?,
        TimeSeries::read_csv_file(&paths.t_amb, "t_amb")?,
    ];
    align(&series, dt, price_scale)
}

/// Resamples already-parsed series `[pv, load, price, t_amb]`.
pub fn align(series: &[TimeSeries; 4], dt: f64, price_scale: f64) -> Result<DisturbanceTable, HarnessError> {
    for s in series {
        s.check_gaps()?;
    }
    let start = series.iter().map(|s| s.times[0]).max().unwrap();
    let end = series.iter().map(|s| *s.times.last().unwrap()).min().unwrap();
    if end < start {
        return Err(HarnessError::NoOverlap);
    }
    let len = ((end - start).num_milliseconds() as f64 / (dt * 3.6e6)).floor() as usize + 1;
    let modes = [
        Resampling::Linear,
        Resampling::Linear,
        Resampling::ZeroOrderHold,
        Resampling::Linear,
    ];
    let cols: Vec<Vec<f64>> = series
        .iter()
        .zip(modes)
        .map(|(s, m)| resample(s, start, dt, len, m))
        .collect();
    let actual = (0..len)
        .map(|i| DisturbanceSample::new(cols[0][i], cols[1][i], cols[2][i] * price_scale, cols[3][i]))
        .collect();
    Ok(DisturbanceTable::new(start, dt, actual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, start: &str, minutes: i64, values: &[f64]) -> TimeSeries {
        let t0 = parse_time(start).unwrap();
        TimeSeries {
            name: name.into(),
            times: (0..values.len() as i64)
                .map(|i| t0 + TimeDelta::minutes(i * minutes))
                .collect(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn half_hourly_price_is_held() {
        let p = series("price", "2024-01-01 00:00", 30, &[0.1, 0.2, 0.3]);
        let t0 = p.times[0];
        let v = resample(&p, t0, 0.25, 5, Resampling::ZeroOrderHold);
        assert_eq!(v, vec![0.1, 0.1, 0.2, 0.2, 0.3]);
    }

    #[test]
    fn aligned_series_pass_through_bit_equal() {
        let vals: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() * 3.1).collect();
        let s = series("pv", "2024-01-01 00:00", 15, &vals);
        assert_eq!(resample(&s, s.times[0], 0.25, 20, Resampling::Linear), vals);
    }

    #[test]
    fn linear_interpolation_and_scaling() {
        let pv = series("pv", "2024-01-01 00:00", 60, &[0.0, 4.0, 8.0]);
        let load = series("load", "2024-01-01 00:00", 15, &[1.0; 9]);
        let price = series("price", "2024-01-01 00:00", 30, &[0.04, 0.08, 0.04, 0.08, 0.04]);
        let t = series("t_amb", "2024-01-01 00:00", 60, &[290.0, 291.0, 292.0]);
        let table = align(&[pv, load, price, t], 0.25, 5.0).unwrap();
        assert_eq!(table.len(), 9);
        assert_eq!(table.actual[1].p_pv, 1.0);
        assert!((table.actual[0].price - 0.2).abs() < 1e-15);
        assert!((table.actual[2].price - 0.4).abs() < 1e-15);
    }

    #[test]
    fn long_gap_is_reported() {
        let mut s = series("load", "2024-01-01 00:00", 15, &[1.0, 1.0, 1.0]);
        s.times[2] += TimeDelta::hours(3);
        let ok = series("x", "2024-01-01 00:00", 15, &[1.0; 3]);
        let err = align(&[ok.clone(), s, ok.clone(), ok], 0.25, 1.0).unwrap_err();
        assert!(matches!(err, HarnessError::Gap { ref series, .. } if series == "load"));
    }

    #[test]
    fn parse_errors_carry_row() {
        let text = "timestamp,value\n2024-01-01 00:00,1\n2024-01-01 00:15,abc\n";
        let err = TimeSeries::read_csv(text.as_bytes(), Path::new("x.csv"), "pv").unwrap_err();
        assert!(matches!(err, HarnessError::Parse { row: 3, .. }));
    }
}
