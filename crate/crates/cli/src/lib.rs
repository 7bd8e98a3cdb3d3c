//! Command-line front end: scenarios, sweeps, Monte Carlo tables and reports.

pub mod commands;
pub mod output;
pub mod scenario;
pub mod sweep;

pub use commands::{run, Cli, Status};
