//! Command-line front end for modalray: configuration, run orchestration and
//! deterministic CSV/SVG export.

pub mod config;
pub mod error;
pub mod format;
pub mod run;
pub mod svg;
pub mod verify;

pub use config::{ConfigError, RunConfig};
pub use error::{CliError, CliResult};
