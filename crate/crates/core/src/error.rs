use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: u64, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid tile grid {t_h}x{t_w}: each side must be in 1..=64")]
    InvalidGrid { t_h: usize, t_w: usize },

    #[error("invalid clip limit {value} at tile ({row}, {col}): must be positive and finite")]
    InvalidClipLimit { row: usize, col: usize, value: f64 },

    #[error("grid mismatch: expected {expected}, got {actual}")]
    GridMismatch { expected: String, actual: String },

    #[error("finite-difference oracle invalid: perturbation crosses a kink in tiles {tiles:?}")]
    KinkCrossing { tiles: Vec<(usize, usize)> },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("non-finite gradient; parameters left untouched")]
    NonFiniteGradient,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no decodable images in {0}")]
    EmptyDataset(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
