//! Command-line front end for the `microchem` solvers: TOML experiment
//! configs, parameter sweeps, cross-route comparison reports and figure
//! curve data, each written as CSV with a JSON manifest.

pub mod app;
pub mod compare;
pub mod config;
pub mod error;
pub mod figures;
pub mod models;
pub mod output;
pub mod selftest;

pub use app::{execute, Cli, Command};
pub use config::{ExperimentConfig, Model};
pub use error::CliError;
