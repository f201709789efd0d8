//! Disturbance data, forecasters, forecast-error statistics and ensemble
//! generation.

mod disturbance;
mod ensemble;
mod forecaster;
mod history;
mod moments;

use thiserror::Error;

pub use disturbance::{DisturbanceSample, DisturbanceTable, TIMESTAMP_FORMAT};
pub use ensemble::{generate_ensemble, EnsembleSet, COVARIANCE_FLOOR};
pub use forecaster::{
    forecaster_registry, persistence_forecast, ExternalForecaster, Forecaster, PerfectForecaster,
    PersistenceForecaster,
};
pub use history::{ErrorHistory, ErrorRecord};
pub use moments::{learn_moments, segment_of, MomentSet};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("table has no forecast columns")]
    MissingForecast,
    #[error("step {index} is outside the data (length {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
}
