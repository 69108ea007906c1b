use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown symbol {symbol:?} at position {position}")]
    UnknownSymbol { symbol: char, position: usize },

    #[error("index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("input alphabet exceeds reservoir size ({inputs} > {reservoir})")]
    AlphabetExceedsReservoir { inputs: usize, reservoir: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate state: norm {norm:e} is too small to normalize")]
    DegenerateState { norm: f64 },

    #[error("singular system; use a ridge parameter eta > 0")]
    SingularSystem,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate key alphabet (size {0}); need at least 2 symbols")]
    DegenerateKeyAlphabet(usize),

    #[error("empty password")]
    EmptyPassword,

    #[error("parameters insufficient for lossless encryption (recall error {0})")]
    LossyEncryption(f64),

    #[error("malformed data: {0}")]
    Malformed(String),

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
