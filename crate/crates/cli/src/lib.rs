//! Config-driven experiment runner over the `autobid` crate: single runs
//! with per-round CSV traces, seed sweeps with log-log slope fits, the LP
//! benchmark and the invariant probes.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_oracle, cmd_probe, cmd_run, cmd_sweep, fit_loglog, simulate, sweep_with};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
