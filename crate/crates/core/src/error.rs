use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
///
/// Variants split into validation problems (bad input data or configuration)
/// and I/O problems; [`Error::is_io`] lets front ends map them to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {msg}")]
    Decode { path: PathBuf, msg: String },

    #[error("{path}: unsupported bit depth (maxval {maxval})")]
    UnsupportedBitDepth { path: PathBuf, maxval: u32 },

    #[error("band {band} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        band: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("wavelengths_nm must be strictly increasing: {0:?}")]
    NonIncreasingWavelengths(Vec<f64>),

    #[error("image stack needs at least one band")]
    EmptyStack,

    #[error("degenerate: no separable foreground (constant band)")]
    DegenerateBand,

    #[error("invalid {field}: {msg}")]
    InvalidConfig { field: String, msg: String },

    #[error("{0}")]
    Validation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &str, msg: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    /// True for filesystem failures, false for everything caused by bad data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
