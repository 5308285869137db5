//! Unified error type with the CLI's exit-code convention attached.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("column {0:?} has no usable values")]
    RejectedColumn(String),

    #[error("factor {0:?} has fewer than two levels")]
    DegenerateFactor(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("gibbs chain diverged at iteration {iter}: {quantity} became non-finite")]
    ChainDivergence { iter: usize, quantity: String },

    #[error("design matrix factorization failed even after jitter retry")]
    SingularDesign,

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Runtime(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an io error with the path or action that produced it.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Attach the pipeline stage that produced this error without changing
    /// its exit-code class.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 for bad inputs or configuration, 2 for runtime
    /// and numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingColumn(_)
            | Error::RaggedRow { .. }
            | Error::RejectedColumn(_)
            | Error::DegenerateFactor(_)
            | Error::InvalidConfig(_)
            | Error::InsufficientData(_)
            | Error::Csv(_) => 1,
            Error::ChainDivergence { .. }
            | Error::SingularDesign
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Runtime(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
