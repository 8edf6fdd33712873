use std::path::PathBuf;

use hamkoop::baselines::BaselineError;
use hamkoop::decoders::DecoderError;
use hamkoop::eval::EvalError;
use hamkoop::integrate::IntegrateError;
use hamkoop::pod::PodError;
use hamkoop::presets::DataError;
use hamkoop::training::TrainError;
use thiserror::Error;

/// Failure of a command, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments or input files.
    #[error("{0}")]
    Validation(String),
    /// A solver, fit or training run broke down numerically.
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            CliError::Validation(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::BadConfig(_)
            | IntegrateError::BadGrid
            | IntegrateError::NonUniformGrid
            | IntegrateError::DimensionMismatch { .. }
            | IntegrateError::TooFewSamples(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteGradient { .. } => {
                CliError::Numerical(e.to_string())
            }
            TrainError::Integrate(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Integrate { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PodError> for CliError {
    fn from(e: PodError) -> Self {
        match e {
            PodError::Linalg(_) => CliError::Numerical(e.to_string()),
            PodError::Integrate(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DecoderError> for CliError {
    fn from(e: DecoderError) -> Self {
        match e {
            DecoderError::NonFinite { .. } | DecoderError::Diff(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Linalg(_) | BaselineError::NonFinite => CliError::Numerical(e.to_string()),
            BaselineError::Integrate(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
