//! Experiment runner for the Langevin sampling core: TOML configuration,
//! parallel ensembles, and CSV/JSON result tables.

pub mod config;
pub mod error;
pub mod experiment;
pub mod loader;
pub mod output;

#[cfg(test)]
mod end_to_end;

pub use config::RunConfig;
pub use error::CliError;
pub use experiment::{run_experiment, ResultBundle, RunOptions};
pub use output::emit_results;
