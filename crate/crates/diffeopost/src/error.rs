use std::path::PathBuf;

/// Error taxonomy shared by all modules of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bad magic: expected \"DFLD\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported precision code {code} (0 = f32, 1 = f64)")]
    UnsupportedPrecision { code: u8 },

    #[error("truncated payload: expected {expected} bytes after the header, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("shape too small: every extent must be >= 3, got {dims:?}")]
    ShapeTooSmall { dims: Vec<usize> },

    #[error("invalid spacing on axis {axis}: {spacing} (must be finite and > 0)")]
    InvalidSpacing { axis: usize, spacing: f64 },

    #[error("non-finite input: {detail}")]
    NonFiniteInput { detail: String },

    #[error("plan mismatch: plan built for dims {plan:?}, applied to dims {got:?}")]
    PlanMismatch { plan: Vec<usize>, got: Vec<usize> },

    #[error("unknown structure id {id}")]
    UnknownStructure { id: u32 },

    #[error("i/o failure on {path:?}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape_mismatch(context: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn non_finite(detail: impl Into<String>) -> Self {
        Error::NonFiniteInput {
            detail: detail.into(),
        }
    }
}
