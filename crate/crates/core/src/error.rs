use thiserror::Error;

use crate::battery::BatteryError;
use crate::dispatch::DispatchError;
use crate::forecast::ForecastError;
use crate::harness::HarnessError;
use crate::scheduler::ScheduleError;

/// Crate-level error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("battery model: {0}")]
    Battery(#[from] BatteryError),
    #[error("forecast: {0}")]
    Forecast(#[from] ForecastError),
    #[error("dispatch: {0}")]
    Dispatch(#[from] DispatchError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("harness: {0}")]
    Harness(#[from] HarnessError),
    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl Error {
    /// Coarse category, used by the CLI for exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Battery(_) => ErrorCategory::Model,
            Error::Forecast(_) => ErrorCategory::Data,
            Error::Dispatch(DispatchError::Config(_)) => ErrorCategory::Config,
            Error::Dispatch(_) => ErrorCategory::Solver,
            Error::Schedule(ScheduleError::DataCoverage { .. }) => ErrorCategory::Data,
            Error::Schedule(ScheduleError::Config(_)) => ErrorCategory::Config,
            Error::Schedule(ScheduleError::Plant { .. }) => ErrorCategory::Model,
            Error::Schedule(_) => ErrorCategory::Solver,
            Error::Harness(HarnessError::Config(_)) => ErrorCategory::Config,
            Error::Harness(HarnessError::Io { .. }) => ErrorCategory::Io,
            Error::Harness(_) => ErrorCategory::Data,
            Error::UnknownStrategy { .. } => ErrorCategory::Config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Model,
    Solver,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Model => 4,
            ErrorCategory::Solver => 5,
            ErrorCategory::Io => 6,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
