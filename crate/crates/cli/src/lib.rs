//! Configuration-driven front end for `roqj-core`.

pub mod commands;
pub mod config;
pub mod csv;

pub use commands::CliError;
pub use config::{Config, Overrides};
