use fpembed_model::ModelError;
use thiserror::Error;

/// Process exit contract: 2 configuration or usage, 3 input data,
/// 4 partial processing, 1 anything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("partial failure: {0}")]
    Partial(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Partial(_) => 4,
            Self::Internal(_) => 1,
        }
    }
}

impl From<fpembed_core::Error> for CliError {
    fn from(e: fpembed_core::Error) -> Self {
        use fpembed_core::Error as E;
        match e {
            E::Parameter(_) | E::Range(_) => Self::Config(e.to_string()),
            E::Input(_)
            | E::EmptyDataset(_)
            | E::Format(_)
            | E::Parse { .. }
            | E::Split { .. }
            | E::Lookup(_)
            | E::Io(_)
            | E::Image(_) => Self::Data(e.to_string()),
            _ => Self::Internal(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config { .. } => Self::Config(e.to_string()),
            ModelError::Core(inner) => inner.into(),
            ModelError::Data(_) | ModelError::Checkpoint { .. } | ModelError::Io(_) => Self::Data(e.to_string()),
            _ => Self::Internal(e.to_string()),
        }
    }
}
