//! File formats, configuration, reports and the batch front end of the
//! `mixedwave` solver. The numerics live in `mixedwave-core`.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod formats;
pub mod problems;
pub mod report;
pub mod run;

pub use config::{Command, RawConfig, RunConfig};
pub use error::{CliError, ConfigError, Result};
pub use run::execute;
