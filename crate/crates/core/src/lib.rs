//! Ensemble nonlinear model predictive control for a residential PV and
//! battery system.
//!
//! The crate is organised bottom-up: [`battery`] is the electro-thermal
//! aging model, [`forecast`] learns forecast-error statistics and samples
//! disturbance ensembles, [`dispatch`] formulates and solves the
//! finite-horizon program, [`scheduler`] runs the receding-horizon market
//! loop and [`harness`] wires configuration, data and metrics together.

pub mod battery;
pub mod dispatch;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod registry;
pub mod scheduler;

pub use error::{Error, ErrorCategory, Result};
