use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("architecture violates grammar: {0}")]
    Grammar(String),

    #[error("unresolvable shape chain at layer {layer}: {reason}")]
    UnresolvableShape { layer: usize, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("schema error at row {row}: {reason}")]
    Schema { row: usize, reason: String },

    #[error("no fall windows in the training set")]
    NoFallWindows,

    #[error("insufficient participants: {0}")]
    InsufficientParticipants(String),

    #[error("budget of {budget_kb} KB infeasible: {rejections} consecutive samples rejected")]
    InfeasibleBudget { budget_kb: f64, rejections: usize },

    #[error("pruning target of {target_kb} KB unreachable: {reason}")]
    UnreachableTarget { target_kb: f64, reason: String },

    #[error("statistical test undefined: {0}")]
    Statistics(String),

    #[error("report incomplete: participant `{participant}` has no result for model `{model}`")]
    MissingCell { participant: String, model: String },

    #[error("model file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
