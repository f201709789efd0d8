//! Experiment configuration, data ingestion, synthetic data, metrics,
//! sweeps and output files.

mod config;
mod metrics;
mod output;
mod sweep;
mod synth;
mod timeseries;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{DataConfig, EnsembleConfig, ExperimentConfig, SimulationConfig};
pub use metrics::{compute_metrics, MetricsReport, RuntimeStats};
pub use output::{write_decisions_csv, write_json, write_steps_csv, write_sweep_csv, write_table_csv, RunSummary};
pub use sweep::{load_data, run_experiment, sweep_ensemble_size, SweepRow};
pub use synth::synth_generator;
pub use timeseries::{align, load_timeseries, resample, Resampling, SeriesPaths, TimeSeries, MAX_GAP_HOURS};
pub use validate::{random_profile, validate_model, ValidationReport, ROUNDING_TOL};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path} row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{series}: gap of {hours:.2} h after {after}")]
    Gap {
        series: String,
        after: String,
        hours: f64,
    },
    #[error("series do not overlap")]
    NoOverlap,
    #[error("empty simulation log")]
    EmptyLog,
    #[error("run with m = {m}: {message}")]
    Sweep { m: usize, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
