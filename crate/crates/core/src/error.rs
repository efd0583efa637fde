use std::path::PathBuf;

/// Errors produced anywhere in the assessment pipeline.
#[derive(Debug, thiserror::Error)]
pub enum SrgaError {
    /// Image or tensor geometry does not satisfy an operation's precondition.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A numeric parameter is outside its supported domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A file does not follow the accepted on-disk format.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Payload values violate a data invariant (e.g. non-finite features).
    #[error("data error: {0}")]
    Data(String),

    /// The centered feature matrix cannot support the requested dimension.
    #[error("rank error: requested {requested} components but achievable rank is {achievable}")]
    Rank { requested: usize, achievable: usize },

    /// Samples carry no spread, so no distribution can be fitted.
    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    /// A caller-side contract was broken (overlapping splits, reference reuse, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal numerical assertion failed.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl SrgaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SrgaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        SrgaError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures rooted in the numbers themselves rather than in the
    /// caller's inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            SrgaError::Rank { .. } | SrgaError::Degenerate(_) | SrgaError::Numeric(_)
        )
    }
}

pub type Result<T, E = SrgaError> = std::result::Result<T, E>;
