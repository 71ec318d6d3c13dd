use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the decision engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("invalid {entity} `{id}`: field `{field}` {message}")]
    Validation {
        entity: &'static str,
        id: String,
        field: String,
        message: String,
    },

    #[error("requirement on `{attribute}` expects a {expected} attribute")]
    TypeMismatch {
        attribute: String,
        expected: &'static str,
    },

    #[error("invalid pairwise matrix: {0}")]
    InvalidMatrix(String),

    #[error("no pairwise comparison matrix supplied for node `{0}`")]
    MissingMatrix(String),

    #[error("criterion value for `{id}` is negative ({value})")]
    NegativeValue { id: String, value: f64 },

    #[error("ranking is empty")]
    EmptyRanking,

    #[error("no feasible image/service combination for component `{0}`")]
    NoFeasibleCombination(String),

    #[error("unknown component `{0}`")]
    UnknownComponent(String),

    #[error("component `{0}` is already committed")]
    AlreadyCommitted(String),

    #[error("no component is selected")]
    NoPendingComponent,

    #[error("component `{0}` has not been evaluated")]
    NotEvaluated(String),

    #[error("pair ({image}, {service}) is not a feasible evaluated combination")]
    InfeasibleSelection { image: String, service: String },

    #[error("event log replay diverged at event {index}: {message}")]
    ReplayMismatch { index: usize, message: String },
}

impl Error {
    pub(crate) fn validation(
        entity: &'static str,
        id: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            entity,
            id: id.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(what: &'static str, err: impl std::fmt::Display) -> Self {
        Error::Parse {
            what,
            message: err.to_string(),
        }
    }

    /// True for errors caused by malformed or inconsistent input documents.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::TypeMismatch { .. }
                | Error::InvalidMatrix(_)
                | Error::MissingMatrix(_)
                | Error::NegativeValue { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
