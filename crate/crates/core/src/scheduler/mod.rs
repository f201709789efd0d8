//! Market calendar, commitment bookkeeping and the receding-horizon loop.

mod calendar;
mod schedule;
mod simulation;

use thiserror::Error;

pub use calendar::{horizon_indices, HorizonIndices};
pub use schedule::{DispatchSchedule, EntryStatus, ScheduleEntry};
pub use simulation::{
    audit_commitments, run_receding_horizon, CommitRecord, CommitmentAudit, DecisionRecord,
    EstimatorNoise, LoopConfig, LoopState, SimulationLog, StepRecord, WindowSnapshot,
    VIOLATION_TOL,
};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("committed interval at step {start} holds {committed:?}; refusing to write {attempted:?}")]
    Immutable {
        start: usize,
        committed: (f64, f64),
        attempted: (f64, f64),
    },
    #[error("no committed control for step {step}")]
    MissingCommitment { step: usize },
    #[error("step {step} is not aligned to a dispatch interval")]
    Misaligned { step: usize },
    #[error("decision starts at step {step} but the schedule ends at {covered_until}")]
    Gap { step: usize, covered_until: usize },
    #[error("data has {available} rows, the run needs {needed}")]
    DataCoverage { needed: usize, available: usize },
    #[error("plant: {message}")]
    Plant { message: String },
    #[error("configuration: {0}")]
    Config(String),
}
