use thiserror::Error;

/// Errors raised anywhere in the decomposition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rank {rank} exceeds dimension {dim} at mode {mode}")]
    RankExceedsDim {
        mode: usize,
        rank: usize,
        dim: usize,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("requested {requested} eigenpairs from a {dim}x{dim} matrix")]
    RankTooLarge { requested: usize, dim: usize },

    #[error("{0} failed to converge")]
    NoConvergence(&'static str),

    #[error("matrix is rank deficient (|r_{index}{index}| = {value:e})")]
    RankDeficient { index: usize, value: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("input tensor has zero Frobenius norm")]
    ZeroNormInput,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("feature order version mismatch: model has {found}, expected {expected}")]
    FeatureVersionMismatch { expected: u32, found: u32 },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error("mode {mode}: {source}")]
    AtMode {
        mode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_mode(self, mode: usize) -> Error {
        match self {
            e @ Error::AtMode { .. } => e,
            e => Error::AtMode {
                mode,
                source: Box::new(e),
            },
        }
    }

    /// Strips any mode context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtMode { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical routines (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::NoConvergence(_)
                | Error::RankDeficient { .. }
                | Error::NotSpd
                | Error::ZeroNormInput
        )
    }

    /// True for file system, serialization, or file-format failures.
    pub fn is_io(&self) -> bool {
        matches!(
            self.root(),
            Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Format(_)
                | Error::SchemaMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
