use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("missing tensor \"{0}\"")]
    MissingTensor(String),

    #[error("shape mismatch for tensor \"{name}\": expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("tensor \"{name}\": unsupported dtype \"{dtype}\" (expected f32 or f64)")]
    Dtype { name: String, dtype: String },

    #[error("tensor \"{name}\": blob truncated (need {needed} bytes at offset {offset}, file has {available})")]
    Truncated {
        name: String,
        offset: u64,
        needed: u64,
        available: u64,
    },

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },

    #[error("token \"{0}\" is not in the model vocabulary")]
    OutOfVocabulary(String),

    #[error("input contains NaN")]
    NaN,

    #[error("invalid summand list: {0}")]
    Summands(String),

    #[error("focus span [{start}, {end}) invalid for sequence of length {len}")]
    Focus { start: usize, end: usize, len: usize },

    #[error("step {step} out of range for sequence of length {len}")]
    StepOutOfRange { step: usize, len: usize },

    #[error("degenerate logit {value} for token {word} at step {step} (|z| <= {epsilon})")]
    DegenerateLogit {
        step: usize,
        word: usize,
        value: f64,
        epsilon: f64,
    },

    #[error("invalid interaction set: {0}")]
    Interactions(String),

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    #[error("invalid corpus request: {0}")]
    Corpus(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
