use std::io;
use std::path::PathBuf;

use modalray_core::ErrorClass;
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] modalray_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{failed} verification check(s) failed")]
    Verify { failed: usize, class: ErrorClass },
}

impl CliError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Config(_) => ErrorClass::Config,
            CliError::Core(e) => e.class(),
            CliError::Io { .. } => ErrorClass::PostProcessing,
            CliError::Verify { class, .. } => *class,
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.class())
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Spectral => 3,
        ErrorClass::Integration => 4,
        ErrorClass::PostProcessing => 5,
    }
}

pub type CliResult<T> = Result<T, CliError>;
