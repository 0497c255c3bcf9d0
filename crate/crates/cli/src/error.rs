use std::fmt;
use std::process::ExitCode;

use regionscope_core::dataset::DatasetError;
use regionscope_core::eurostat::EurostatError;
use regionscope_core::pipeline::PipelineError;

/// Exit status classes; the numeric values are a stable scripting contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config = 1,
    Data = 2,
    Network = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }

    /// Client errors carry the dataset id they came from.
    pub fn from_eurostat(dataset_id: &str, e: EurostatError) -> Self {
        let kind = if e.is_network() {
            ErrorKind::Network
        } else if matches!(e, EurostatError::InvalidSpec(_)) {
            ErrorKind::Config
        } else {
            ErrorKind::Data
        };
        Self {
            kind,
            message: format!("{dataset_id}: {e}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Self::config(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}
