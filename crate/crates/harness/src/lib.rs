//! Experiment harness for `accelwf`.
//!
//! Every experiment is described by an [`ExperimentConfig`] and writes CSV
//! files that depend only on the config: single traces, iteration-count
//! sweeps, head-to-head log-error slopes, leave-one-out proximity, the
//! quadratic rate oracle, coded-diffraction recovery and concentration
//! checks. The `prbench` binary is a thin wrapper over [`execute`].

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod reports;
pub mod sweep;
pub mod table;

pub use commands::{execute, Outcome};
pub use config::{Experiment, ExperimentConfig, InitMode};
pub use error::{HarnessError, Result};
