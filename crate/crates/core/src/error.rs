use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("chain break between residues {0} and {1}")]
    ChainBreak(usize, usize),
    #[error("too short: {len} residues, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("no parsable ATOM records")]
    EmptyStructure,
    #[error("empty pocket: no receptor residue within the cutoff")]
    EmptyPocket,
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("chain '{0}' not found")]
    ChainNotFound(char),
    #[error("complex rejected: {0}")]
    Rejected(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),
    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),
    #[error("letter '{0}' is not in the 20-letter amino-acid alphabet")]
    Alphabet(char),
    #[error("masking error: {0}")]
    Masking(String),
    #[error("state error: {0}")]
    State(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Divergence(_) => 4,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
