//! Config format, JSON reports and the command-line front end for
//! [`funcdet_core`].

pub mod cli;
pub mod config;
pub mod report;

pub use config::{load_problem_pair, Config, ConfigError};
