use std::fmt;

use catpose_core::eval::EvalError;
use catpose_core::io::{FormatError, ManifestError};
use catpose_core::pipeline::PipelineError;
use catpose_core::synth::SynthError;
use catpose_core::RefineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Config(_) => ErrorKind::Config,
            CliError::Synth(SynthError::InvalidConfig(_) | SynthError::InvalidNoise(_) | SynthError::InvalidScene(_)) => {
                ErrorKind::Config
            }
            CliError::Synth(_) => ErrorKind::Data,
            CliError::Pipeline(e) => match e {
                PipelineError::UnknownQuery(_) => ErrorKind::Config,
                PipelineError::Refine(RefineError::InvalidConfig(_)) => ErrorKind::Config,
                PipelineError::Refine(RefineError::Diverged { .. } | RefineError::NonFinite) => ErrorKind::Numerical,
                PipelineError::Eval(EvalError::InvalidThresholds(_)) => ErrorKind::Config,
                _ => ErrorKind::Data,
            },
        }
    }
}

/// The single JSON line written to stderr on failure.
pub struct ErrorLine<'a>(pub &'a CliError);

impl fmt::Display for ErrorLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = self.0.kind();
        let line = serde_json::json!({
            "error": kind.as_str(),
            "exit_code": kind.exit_code(),
            "message": self.0.to_string(),
        });
        write!(f, "{line}")
    }
}
