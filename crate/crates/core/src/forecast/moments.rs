use serde::{Deserialize, Serialize};

use super::{ErrorRecord, ForecastError};

/// Segment of the day, 1-based, that contains time `t` [h].
///
/// The day is split into `segments` equal parts; times outside `[0, 24)`
/// wrap around.
pub fn segment_of(t: f64, segments: usize) -> usize {
    assert!(segments > 0, "segments per day must be positive");
    let hour = t.rem_euclid(24.0);
    let width = 24.0 / segments as f64;
    ((hour / width).floor() as usize + 1).min(segments)
}

/// First and second moments of the forecast error in one daily segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub segment: usize,
    pub mean: [f64; 4],
    pub covariance: [[f64; 4]; 4],
    pub count: usize,
}

impl MomentSet {
    /// Moments of a degenerate (zero) error distribution.
    pub fn zero(segment: usize) -> Self {
        Self {
            segment,
            mean: [0.0; 4],
            covariance: [[0.0; 4]; 4],
            count: 0,
        }
    }
}

/// Sample mean and unbiased sample covariance of the errors that fall into
/// `segment` during the last `window_days` days of `history`.
///
/// The window ends at the latest record in `history`.
pub fn learn_moments(
    history: &[ErrorRecord],
    segment: usize,
    segments: usize,
    window_days: usize,
) -> Result<MomentSet, ForecastError> {
    if segment == 0 || segment > segments {
        return Err(ForecastError::InvalidArgument(format!(
            "segment {segment} outside 1..={segments}"
        )));
    }
    let latest = history
        .iter()
        .map(|r| r.time)
        .fold(f64::NEG_INFINITY, f64::max);
    let cutoff = latest - 24.0 * window_days as f64;
    let matched: Vec<&[f64; 4]> = history
        .iter()
        .filter(|r| r.time > cutoff && segment_of(r.time, segments) == segment)
        .map(|r| &r.error)
        .collect();
    let n = matched.len();
    if n < 2 {
        return Err(ForecastError::InsufficientHistory {
            needed: 2,
            available: n,
        });
    }
    let mut mean = [0.0; 4];
    for e in &matched {
        for (m, v) in mean.iter_mut().zip(e.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut covariance = [[0.0; 4]; 4];
    for e in &matched {
        for a in 0..4 {
            for b in a..4 {
                covariance[a][b] += (e[a] - mean[a]) * (e[b] - mean[b]);
            }
        }
    }
    for a in 0..4 {
        for b in a..4 {
            covariance[a][b] /= (n - 1) as f64;
            covariance[b][a] = covariance[a][b];
        }
    }
    Ok(MomentSet {
        segment,
        mean,
        covariance,
        count: n,
    })
}
