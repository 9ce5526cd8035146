//! Experiment drivers, configuration, and the command-line front end.
//!
//! Each experiment has a `run_*` function that maps a [`config::RunConfig`]
//! to plain row structs plus a `write_*_csv` serializer, so drivers are
//! testable without touching the filesystem. Trials fan out through
//! [`exec::map_indexed`], which is data-parallel by default and sequential
//! when the `parallel` feature is disabled; results are identical bytes
//! either way.

pub mod bandit_suite;
pub mod cli;
pub mod config;
pub mod consumption_run;
pub mod exec;
pub mod frontier;
pub mod landscape;
pub mod predict;

pub use cli::{cli_main, OUT_DIR_ENV};
pub use config::{Experiment, RunConfig};
